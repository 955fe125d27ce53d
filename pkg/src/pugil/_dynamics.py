"""Compiled inner loops for the articulated-body simulation.

Everything here is numba-jitted and operates on the packed array bundle
produced by `pack_model`. The public simulation API lives in `sim`; this
module is an implementation detail and keeps no state of its own.

Conventions:
  - Each character is a planar chain hanging off a kinematic root that only
    translates along x. Bone angles are absolute (world) angles in the
    character's canonical frame, which always faces +x; a character with
    facing = -1 has its x coordinates mirrored at the world boundary.
  - Joint i drives bone i. `parent_bone[i]` is the bone carrying the joint
    anchor (-1 means the root point), and `anc[k, b]` flags joint k as an
    ancestor of bone b, itself included.
  - Dynamics are reduced-coordinate: M(q) qddot = Q assembled from point
    Jacobians, integrated with semi-implicit Euler substeps.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from numba import njit

TWO_PI = 2.0 * math.pi

# punch flag automaton
FLAG_NOT_HAPPENED = 0
FLAG_HAPPENED_NOW = 1
FLAG_HAPPENED_BEFORE = 2

# task kinds
TASK_NULL = 0
TASK_MOVE = 1
TASK_PUNCH = 2

STATUS_OK = 0
STATUS_DIVERGED = 1


class PackedModel(NamedTuple):
    """Read-only array bundle describing one character chain.

    Both characters of a world share the same model. All geometry is in the
    canonical (+x facing) frame with the root pinned at (0, root_y).
    """

    n_joints: int
    root_y: float
    lengths: np.ndarray
    masses: np.ndarray
    inertias: np.ndarray
    comfracs: np.ndarray
    rests: np.ndarray
    anchor_fracs: np.ndarray
    parent_bone: np.ndarray
    anc: np.ndarray
    # per-bone ancestor joint lists (anc flattened for tight loops)
    anc_count: np.ndarray
    anc_list: np.ndarray
    q_lo: np.ndarray
    q_hi: np.ndarray
    kp: np.ndarray
    kd: np.ndarray
    tau_max: np.ndarray
    ref_pose: np.ndarray
    ref_theta: np.ndarray
    # collision discs: disc_bone < 0 marks a static disc at (disc_sx, disc_sy)
    disc_bone: np.ndarray
    disc_frac: np.ndarray
    disc_radius: np.ndarray
    disc_sx: np.ndarray
    disc_sy: np.ndarray
    # role indices into the disc arrays (-1 when the model has no such part)
    head_disc: int
    chest_disc: int
    fist_disc: np.ndarray
    relax_pos: np.ndarray
    static_mass: float
    static_com_y: float


@njit(cache=True)
def wrap_angle(x):
    y = x % TWO_PI
    if y > math.pi:
        y -= TWO_PI
    return y


@njit(cache=True)
def fk_chain(mdl, q, qdot, theta, omega, ax, ay, vax, vay, cx, cy, vcx, vcy):
    """Forward kinematics in the canonical frame.

    Fills per-bone absolute angle and angular velocity, joint anchor
    position/velocity, and centre-of-mass position/velocity. The root point
    sits at (0, root_y) and does not move within this frame.
    """
    nj = mdl.n_joints
    for j in range(nj):
        pb = mdl.parent_bone[j]
        if pb < 0:
            base_theta = 0.0
            base_omega = 0.0
            ax[j] = 0.0
            ay[j] = mdl.root_y
            vax[j] = 0.0
            vay[j] = 0.0
        else:
            base_theta = theta[pb]
            base_omega = omega[pb]
            f = mdl.anchor_fracs[j] * mdl.lengths[pb]
            px = ax[pb] + f * math.cos(theta[pb])
            py = ay[pb] + f * math.sin(theta[pb])
            ax[j] = px
            ay[j] = py
            # velocity of the anchor point carried by the parent bone
            vax[j] = vax[pb] - omega[pb] * (py - ay[pb])
            vay[j] = vay[pb] + omega[pb] * (px - ax[pb])
        theta[j] = base_theta + mdl.rests[j] + q[j]
        omega[j] = base_omega + qdot[j]
        d = mdl.comfracs[j] * mdl.lengths[j]
        cx[j] = ax[j] + d * math.cos(theta[j])
        cy[j] = ay[j] + d * math.sin(theta[j])
        vcx[j] = vax[j] - omega[j] * (cy[j] - ay[j])
        vcy[j] = vay[j] + omega[j] * (cx[j] - ax[j])


@njit(cache=True)
def disc_positions(mdl, theta, omega, ax, ay, vax, vay, px, py, vx, vy):
    """Collision disc centres and velocities, canonical frame."""
    for d in range(mdl.disc_bone.shape[0]):
        b = mdl.disc_bone[d]
        if b < 0:
            px[d] = mdl.disc_sx[d]
            py[d] = mdl.disc_sy[d]
            vx[d] = 0.0
            vy[d] = 0.0
        else:
            f = mdl.disc_frac[d] * mdl.lengths[b]
            px[d] = ax[b] + f * math.cos(theta[b])
            py[d] = ay[b] + f * math.sin(theta[b])
            vx[d] = vax[b] - omega[b] * (py[d] - ay[b])
            vy[d] = vay[b] + omega[b] * (px[d] - ax[b])


@njit(cache=True)
def assemble_dynamics(mdl, qdot, theta, omega, ax, ay, vax, vay, cx, cy,
                      vcx, vcy, q, targets, gravity, M, Q):
    """Mass matrix and generalized forces (gravity + PD - velocity bias).

    Column k of a bone's linear Jacobian is perp(com - anchor_k) for each
    ancestor joint k; the angular Jacobian entry is 1. The velocity-product
    acceleration with qddot = 0 is sum_k qdot_k * perp(vcom - vanchor_k),
    which covers all Coriolis/centrifugal terms of the planar chain.
    """
    nj = mdl.n_joints
    for i in range(nj):
        Q[i] = 0.0
        for j in range(nj):
            M[i, j] = 0.0
    for b in range(nj):
        m = mdl.masses[b]
        ib = mdl.inertias[b]
        na = mdl.anc_count[b]
        # velocity-product acceleration of the com
        a0x = 0.0
        a0y = 0.0
        for ii in range(na):
            k = mdl.anc_list[b, ii]
            a0x += qdot[k] * -(vcy[b] - vay[k])
            a0y += qdot[k] * (vcx[b] - vax[k])
        for ii in range(na):
            k = mdl.anc_list[b, ii]
            jvx = -(cy[b] - ay[k])
            jvy = cx[b] - ax[k]
            Q[k] += m * (-gravity) * jvy
            Q[k] -= m * (jvx * a0x + jvy * a0y)
            for jj in range(ii, na):
                l = mdl.anc_list[b, jj]
                jwx = -(cy[b] - ay[l])
                jwy = cx[b] - ax[l]
                M[k, l] += m * (jvx * jwx + jvy * jwy) + ib
    for k in range(nj):
        for l in range(k + 1, nj):
            M[l, k] = M[k, l]
    # PD actuation toward the frame's spline targets
    for j in range(nj):
        err = wrap_angle(targets[j] - q[j])
        tau = mdl.kp[j] * err - mdl.kd[j] * qdot[j]
        if tau > mdl.tau_max[j]:
            tau = mdl.tau_max[j]
        elif tau < -mdl.tau_max[j]:
            tau = -mdl.tau_max[j]
        Q[j] += tau


@njit(cache=True)
def solve_spd(M, b, x, L, w):
    """Solve M x = b for symmetric positive definite M via Cholesky."""
    n = M.shape[0]
    for i in range(n):
        for j in range(i + 1):
            s = M[i, j]
            for k in range(j):
                s -= L[i, k] * L[j, k]
            if i == j:
                if s < 1e-12:
                    s = 1e-12
                L[i, i] = math.sqrt(s)
            else:
                L[i, j] = s / L[j, j]
    for i in range(n):
        s = b[i]
        for k in range(i):
            s -= L[i, k] * w[k]
        w[i] = s / L[i, i]
    for i in range(n - 1, -1, -1):
        s = w[i]
        for k in range(i + 1, n):
            s -= L[k, i] * x[k]
        x[i] = s / L[i, i]


def make_workspace(nj: int, nd: int):
    """Scratch arrays for step_frame, allocated once per caller."""
    return (
        np.empty((2, nj)), np.empty((2, nj)),  # theta, omega
        np.empty((2, nj)), np.empty((2, nj)),  # ax, ay
        np.empty((2, nj)), np.empty((2, nj)),  # vax, vay
        np.empty((2, nj)), np.empty((2, nj)),  # cx, cy
        np.empty((2, nj)), np.empty((2, nj)),  # vcx, vcy
        np.empty((2, nd)), np.empty((2, nd)),  # dpx, dpy
        np.empty((2, nd)), np.empty((2, nd)),  # dvx, dvy
        np.empty((2, nd)), np.empty((2, nd)),  # wpx, wpy
        np.empty((2, nd)), np.empty((2, nd)),  # wvx, wvy
        np.empty((nj, nj)),                    # M
        np.empty((2, nj)), np.empty((2, nj)),  # Q, Qc
        np.empty(nj),                          # qddot
        np.empty((nj, nj)), np.empty(nj),      # L, w
    )


@njit(cache=True)
def step_frame(mdl, q, qdot, root_x, root_vx, facing,
               punch_active, punch_hand, punch_target, punch_flag,
               targets, root_cmd, gravity, dt, n_sub,
               contact_k, contact_c, v_min, root_min_gap, arena_half,
               events, ws):
    """Advance the two-character world by one control frame in place.

    `q`, `qdot` are (2, nj); `targets` likewise. `events` is a (2, 5) scratch
    filled with (attacker, hand, target, rel_speed, power) rows; rows stay
    -1 when unused. `ws` is a make_workspace bundle. Returns STATUS_DIVERGED
    if the state left the finite range, otherwise STATUS_OK.
    """
    nj = mdl.n_joints
    nd = mdl.disc_bone.shape[0]
    h = dt / n_sub

    # a punch registered last frame is history from this frame on
    for c in range(2):
        if punch_active[c] != 0 and punch_flag[c] == FLAG_HAPPENED_NOW:
            punch_flag[c] = FLAG_HAPPENED_BEFORE
    for c in range(2):
        events[c, 0] = -1.0
        root_vx[c] = root_cmd[c]

    (theta, omega, ax, ay, vax, vay, cx, cy, vcx, vcy,
     dpx, dpy, dvx, dvy, wpx, wpy, wvx, wvy,
     M, Q, Qc, qddot, L, w) = ws

    for _ in range(n_sub):
        for c in range(2):
            fk_chain(mdl, q[c], qdot[c], theta[c], omega[c], ax[c], ay[c],
                     vax[c], vay[c], cx[c], cy[c], vcx[c], vcy[c])
            disc_positions(mdl, theta[c], omega[c], ax[c], ay[c],
                           vax[c], vay[c], dpx[c], dpy[c], dvx[c], dvy[c])
            f = facing[c]
            for d in range(nd):
                wpx[c, d] = root_x[c] + f * dpx[c, d]
                wpy[c, d] = dpy[c, d]
                wvx[c, d] = root_vx[c] + f * dvx[c, d]
                wvy[c, d] = dvy[c, d]
            for j in range(nj):
                Qc[c, j] = 0.0

        # penalty contacts between opposing discs, equal and opposite
        for da in range(nd):
            for db in range(nd):
                dx = wpx[0, da] - wpx[1, db]
                dy = wpy[0, da] - wpy[1, db]
                r = mdl.disc_radius[da] + mdl.disc_radius[db]
                dist2 = dx * dx + dy * dy
                if dist2 >= r * r or dist2 < 1e-12:
                    continue
                dist = math.sqrt(dist2)
                nx = dx / dist
                ny = dy / dist
                depth = r - dist
                rvx_ = wvx[0, da] - wvx[1, db]
                rvy_ = wvy[0, da] - wvy[1, db]
                depth_rate = -(rvx_ * nx + rvy_ * ny)
                fmag = contact_k * depth + contact_c * depth_rate
                if fmag <= 0.0:
                    continue
                fx = fmag * nx
                fy = fmag * ny
                ba = mdl.disc_bone[da]
                bb = mdl.disc_bone[db]
                if ba >= 0:
                    lfx = facing[0] * fx
                    for ii in range(mdl.anc_count[ba]):
                        k = mdl.anc_list[ba, ii]
                        Qc[0, k] += (-(dpy[0, da] - ay[0, k]) * lfx
                                     + (dpx[0, da] - ax[0, k]) * fy)
                if bb >= 0:
                    lfx = facing[1] * -fx
                    for ii in range(mdl.anc_count[bb]):
                        k = mdl.anc_list[bb, ii]
                        Qc[1, k] += (-(dpy[1, db] - ay[1, k]) * lfx
                                     + (dpx[1, db] - ax[1, k]) * -fy)

        # punch events, judged on the pre-integration state
        for c in range(2):
            if punch_active[c] == 0 or punch_flag[c] != FLAG_NOT_HAPPENED:
                continue
            o = 1 - c
            hd = mdl.fist_disc[punch_hand[c]]
            td = mdl.head_disc if punch_target[c] == 0 else mdl.chest_disc
            if hd < 0 or td < 0:
                continue
            dx = wpx[c, hd] - wpx[o, td]
            dy = wpy[c, hd] - wpy[o, td]
            r = mdl.disc_radius[hd] + mdl.disc_radius[td]
            dist2 = dx * dx + dy * dy
            if dist2 >= r * r or dist2 < 1e-12:
                continue
            dist = math.sqrt(dist2)
            rvx_ = wvx[c, hd] - wvx[o, td]
            rvy_ = wvy[c, hd] - wvy[o, td]
            speed = -(rvx_ * dx + rvy_ * dy) / dist
            if speed < v_min:
                continue
            punch_flag[c] = FLAG_HAPPENED_NOW
            power = 1000.0 * speed
            if power < 1000.0:
                power = 1000.0
            elif power > 3000.0:
                power = 3000.0
            events[c, 0] = c
            events[c, 1] = punch_hand[c]
            events[c, 2] = punch_target[c]
            events[c, 3] = speed
            events[c, 4] = power

        for c in range(2):
            assemble_dynamics(mdl, qdot[c], theta[c], omega[c], ax[c], ay[c],
                              vax[c], vay[c], cx[c], cy[c], vcx[c], vcy[c],
                              q[c], targets[c], gravity, M, Q[c])
            for j in range(nj):
                Q[c, j] += Qc[c, j]
            solve_spd(M, Q[c], qddot, L, w)
            for j in range(nj):
                qdot[c, j] += h * qddot[j]
                q[c, j] += h * qdot[c, j]
                if q[c, j] < mdl.q_lo[j]:
                    q[c, j] = mdl.q_lo[j]
                    if qdot[c, j] < 0.0:
                        qdot[c, j] = 0.0
                elif q[c, j] > mdl.q_hi[j]:
                    q[c, j] = mdl.q_hi[j]
                    if qdot[c, j] > 0.0:
                        qdot[c, j] = 0.0

        # kinematic roots: arena walls, then a symmetric minimum-gap shove
        for c in range(2):
            root_x[c] += h * root_vx[c]
            if root_x[c] < -arena_half:
                root_x[c] = -arena_half
            elif root_x[c] > arena_half:
                root_x[c] = arena_half
        lo = 0 if root_x[0] <= root_x[1] else 1
        hi = 1 - lo
        gap = root_x[hi] - root_x[lo]
        if gap < root_min_gap:
            mid = 0.5 * (root_x[lo] + root_x[hi])
            root_x[lo] = mid - 0.5 * root_min_gap
            root_x[hi] = mid + 0.5 * root_min_gap
            if root_x[lo] < -arena_half:
                root_x[lo] = -arena_half
                root_x[hi] = -arena_half + root_min_gap
            elif root_x[hi] > arena_half:
                root_x[hi] = arena_half
                root_x[lo] = arena_half - root_min_gap

    for c in range(2):
        for j in range(nj):
            if not (math.isfinite(q[c, j]) and math.isfinite(qdot[c, j])):
                return STATUS_DIVERGED
        if not math.isfinite(root_x[c]):
            return STATUS_DIVERGED
    return STATUS_OK


@njit(cache=True)
def spline_value(times, targets, t, out):
    """Piecewise cubic Hermite through the knot rows of `targets`.

    Clamps to the end knots outside the time range; finite-difference
    tangents, one-sided at the ends. Mirrors the reference implementation
    in `spline` and is pinned to it by tests.
    """
    n = times.shape[0]
    ndof = targets.shape[1]
    if t <= times[0]:
        for j in range(ndof):
            out[j] = targets[0, j]
        return
    if t >= times[n - 1]:
        for j in range(ndof):
            out[j] = targets[n - 1, j]
        return
    seg = 0
    for i in range(n - 1):
        if t < times[i + 1]:
            seg = i
            break
    ta = times[seg]
    tb = times[seg + 1]
    dt_seg = tb - ta
    s = (t - ta) / dt_seg
    h00 = (2.0 * s - 3.0) * s * s + 1.0
    h10 = ((s - 2.0) * s + 1.0) * s
    h01 = (3.0 - 2.0 * s) * s * s
    h11 = (s - 1.0) * s * s
    for j in range(ndof):
        if seg == 0:
            m0 = (targets[1, j] - targets[0, j]) / (times[1] - times[0])
        else:
            m0 = (targets[seg + 1, j] - targets[seg - 1, j]) / (times[seg + 1] - times[seg - 1])
        if seg + 1 == n - 1:
            m1 = (targets[n - 1, j] - targets[n - 2, j]) / (times[n - 1] - times[n - 2])
        else:
            m1 = (targets[seg + 2, j] - targets[seg, j]) / (times[seg + 2] - times[seg])
        out[j] = (h00 * targets[seg, j] + h10 * dt_seg * m0
                  + h01 * targets[seg + 1, j] + h11 * dt_seg * m1)


@njit(cache=True)
def state_cost(mdl, q, qdot, root_x, root_vx, facing,
               punch_flag, task_kind, task_hand, task_target,
               move_x, move_y,
               pose_tol_rad, move_tol, hand_vel_tol, relax_tol,
               punch_speed_desired,
               theta, omega, ax, ay, vax, vay, cx, cy, vcx, vcy,
               theta_o, omega_o, ax_o, ay_o, vax_o, vay_o,
               cx_o, cy_o, vcx_o, vcy_o,
               q_o, qdot_o, root_x_o, root_vx_o, facing_o):
    """Pose + move + punch cost of one character's state (positive)."""
    nj = mdl.n_joints
    fk_chain(mdl, q, qdot, theta, omega, ax, ay, vax, vay, cx, cy, vcx, vcy)
    cost = 0.0
    for b in range(nj):
        dev = wrap_angle(theta[b] - mdl.ref_theta[b])
        cost += (dev / pose_tol_rad) * (dev / pose_tol_rad)

    if task_kind == TASK_NULL:
        return cost

    hd = mdl.fist_disc[task_hand]
    hb = mdl.disc_bone[hd]
    f = mdl.disc_frac[hd] * mdl.lengths[hb]
    hx_l = ax[hb] + f * math.cos(theta[hb])
    hy_l = ay[hb] + f * math.sin(theta[hb])
    hvx_l = vax[hb] - omega[hb] * (hy_l - ay[hb])
    hvy_l = vay[hb] + omega[hb] * (hx_l - ax[hb])
    hx = root_x + facing * hx_l
    hy = hy_l
    hvx = root_vx + facing * hvx_l
    hvy = hvy_l

    if task_kind == TASK_MOVE:
        dx = hx - move_x
        dy = hy - move_y
        d = math.sqrt(dx * dx + dy * dy)
        cost += (d / move_tol) * (d / move_tol)
        return cost

    # punch phases, gated by the flag automaton
    if punch_flag == FLAG_NOT_HAPPENED:
        fk_chain(mdl, q_o, qdot_o, theta_o, omega_o, ax_o, ay_o,
                 vax_o, vay_o, cx_o, cy_o, vcx_o, vcy_o)
        td = mdl.head_disc if task_target == 0 else mdl.chest_disc
        tb = mdl.disc_bone[td]
        ft = mdl.disc_frac[td] * mdl.lengths[tb]
        tx_l = ax_o[tb] + ft * math.cos(theta_o[tb])
        ty_l = ay_o[tb] + ft * math.sin(theta_o[tb])
        tx = root_x_o + facing_o * tx_l
        ty = ty_l
        dx = tx - hx
        dy = ty - hy
        d = math.sqrt(dx * dx + dy * dy)
        if d > 1e-9:
            wish_x = punch_speed_desired * dx / d
            wish_y = punch_speed_desired * dy / d
        else:
            wish_x = 0.0
            wish_y = 0.0
        ex = hvx - wish_x
        ey = hvy - wish_y
        e = math.sqrt(ex * ex + ey * ey)
        cost += (e / hand_vel_tol) * (e / hand_vel_tol)
    elif punch_flag == FLAG_HAPPENED_NOW:
        speed = math.sqrt(hvx * hvx + hvy * hvy)
        power = 1000.0 * speed
        if power < 1000.0:
            power = 1000.0
        elif power > 3000.0:
            power = 3000.0
        cost += -power
    else:
        dx = hx_l - mdl.relax_pos[task_hand, 0]
        dy = hy_l - mdl.relax_pos[task_hand, 1]
        d = math.sqrt(dx * dx + dy * dy)
        cost += (d / relax_tol) * (d / relax_tol)
    return cost


@njit(cache=True)
def _self_hand(mdl, q, qdot, task_hand,
               theta, omega, ax, ay, vax, vay, cx, cy, vcx, vcy):
    """Root-local position of the task hand's fist center."""
    fk_chain(mdl, q, qdot, theta, omega, ax, ay, vax, vay, cx, cy, vcx, vcy)
    hd = mdl.fist_disc[task_hand]
    hb = mdl.disc_bone[hd]
    f = mdl.disc_frac[hd] * mdl.lengths[hb]
    hx_l = ax[hb] + f * math.cos(theta[hb])
    hy_l = ay[hb] + f * math.sin(theta[hb])
    return hx_l, hy_l


@njit(cache=True)
def rollout(mdl, q, qdot, root_x, root_vx, facing,
            punch_active, punch_hand, punch_target, punch_flag,
            self_id, task_kind, task_hand, task_target, move_x, move_y,
            task_age, max_task, move_done, punch_done,
            self_times, self_targets, opp_times, opp_targets, opp_hold,
            root_cmd, dt, n_steps, opp_horizon,
            gravity, n_sub, contact_k, contact_c, v_min,
            root_min_gap, arena_half,
            pose_tol_rad, move_tol, hand_vel_tol, relax_tol,
            punch_speed_desired, ws):
    """Mean state fitness over an `n_steps`-frame forward simulation.

    Mutates the passed (copied) world arrays. The opponent's spline is
    frozen at `opp_horizon`; with `opp_hold` the opponent holds the
    reference pose instead. The task itself evolves the way the game
    evolves it: it dies past `max_task` seconds of age, a Move task
    completes within `move_done` of its target, a Punch task completes
    once the return phase has been entered and the hand is back within
    `punch_done` of the relax position. From then on only the pose cost
    is charged. Returns -inf on divergence so the candidate ranks last.
    """
    nj = mdl.n_joints
    opp = 1 - self_id
    targets = np.empty((2, nj))
    events = np.empty((2, 5))
    theta = np.empty((2, nj))
    omega = np.empty((2, nj))
    ax = np.empty((2, nj))
    ay = np.empty((2, nj))
    vax = np.empty((2, nj))
    vay = np.empty((2, nj))
    cx = np.empty((2, nj))
    cy = np.empty((2, nj))
    vcx = np.empty((2, nj))
    vcy = np.empty((2, nj))

    task_on = task_kind != TASK_NULL
    prev_flag = punch_flag[self_id]
    prev_hx_l = 0.0
    prev_hy_l = 0.0
    if task_on:
        prev_hx_l, prev_hy_l = _self_hand(
            mdl, q[self_id], qdot[self_id], task_hand,
            theta[0], omega[0], ax[0], ay[0], vax[0], vay[0],
            cx[0], cy[0], vcx[0], vcy[0])

    total = 0.0
    for k in range(1, n_steps + 1):
        if task_on:
            # frame-start task update, same rules the match loop applies
            age = task_age + (k - 1) * dt
            done = age > max_task + 1e-12
            if not done and task_kind == TASK_MOVE:
                dx = root_x[self_id] + facing[self_id] * prev_hx_l - move_x
                dy = prev_hy_l - move_y
                done = dx * dx + dy * dy <= move_done * move_done
            if not done and task_kind == TASK_PUNCH:
                if prev_flag == FLAG_HAPPENED_BEFORE:
                    dx = prev_hx_l - mdl.relax_pos[task_hand, 0]
                    dy = prev_hy_l - mdl.relax_pos[task_hand, 1]
                    done = dx * dx + dy * dy <= punch_done * punch_done
            if done:
                task_on = False
                if task_kind == TASK_PUNCH:
                    punch_active[self_id] = 0

        t = k * dt
        spline_value(self_times, self_targets, t, targets[self_id])
        if opp_hold != 0:
            for j in range(nj):
                targets[opp, j] = mdl.ref_pose[j]
        else:
            t_o = t if t < opp_horizon else opp_horizon
            spline_value(opp_times, opp_targets, t_o, targets[opp])
        status = step_frame(mdl, q, qdot, root_x, root_vx, facing,
                            punch_active, punch_hand, punch_target,
                            punch_flag, targets, root_cmd, gravity, dt,
                            n_sub, contact_k, contact_c, v_min,
                            root_min_gap, arena_half, events, ws)
        if status != STATUS_OK:
            return -math.inf
        eff_kind = task_kind if task_on else TASK_NULL
        total += -state_cost(
            mdl, q[self_id], qdot[self_id], root_x[self_id],
            root_vx[self_id], facing[self_id], punch_flag[self_id],
            eff_kind, task_hand, task_target, move_x, move_y,
            pose_tol_rad, move_tol, hand_vel_tol, relax_tol,
            punch_speed_desired,
            theta[0], omega[0], ax[0], ay[0], vax[0], vay[0],
            cx[0], cy[0], vcx[0], vcy[0],
            theta[1], omega[1], ax[1], ay[1], vax[1], vay[1],
            cx[1], cy[1], vcx[1], vcy[1],
            q[opp], qdot[opp], root_x[opp], root_vx[opp], facing[opp])
        if task_on:
            # state_cost just ran FK for self into the row-0 buffers
            prev_flag = punch_flag[self_id]
            hd = mdl.fist_disc[task_hand]
            hb = mdl.disc_bone[hd]
            f = mdl.disc_frac[hd] * mdl.lengths[hb]
            prev_hx_l = ax[0][hb] + f * math.cos(theta[0][hb])
            prev_hy_l = ay[0][hb] + f * math.sin(theta[0][hb])
    return total / n_steps

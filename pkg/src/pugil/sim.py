"""Planar articulated-body simulation for the sparring characters.

A character is a kinematic root that slides along x plus a chain of rigid
bones on actuated hinge joints: pelvis (welded), torso, head and two
two-segment arms, six hinge DOF in total. Dynamics are reduced-coordinate
with PD actuation toward per-frame joint targets, penalty contacts between
the collision discs of opposing characters, and punch-event detection
gated by each character's active punch status.

World geometry convention: a character's own frame always faces +x; the
`facing` sign mirrors x when mapping to world coordinates, so the same
joint-space pose means the same thing for both fighters.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from . import _dynamics
from ._dynamics import PackedModel
from .config import Config, ConfigError


class SimulationDiverged(RuntimeError):
    """The integrator produced non-finite state."""


class Hand(enum.IntEnum):
    LEFT = 0
    RIGHT = 1


class TargetArea(enum.IntEnum):
    HEAD = 0
    CHEST = 1


class PunchFlag(enum.IntEnum):
    NOT_HAPPENED = 0
    HAPPENED_NOW = 1
    HAPPENED_BEFORE = 2


@dataclass(frozen=True)
class Joint:
    """Hinge joint driving one bone, axis perpendicular to the plane."""

    name: str
    parent: Optional[str]  # parent bone name, None anchors to the root point
    anchor_fraction: float  # along the parent bone, 0 = parent anchor
    rest_angle: float  # bone angle relative to parent at q = 0
    lo: float
    hi: float
    kp: float
    kd: float
    tau_max: float


@dataclass(frozen=True)
class Bone:
    name: str
    length: float
    mass: float
    role: str  # torso | head | upperArm | foreArm | hand
    disc_radius: float = 0.0  # 0 disables the collision disc
    disc_fraction: float = 0.5
    com_fraction: float = 0.5
    joint: Optional[Joint] = None  # None welds the bone (pelvis)

    @property
    def inertia(self) -> float:
        # uniform thin rod about its com
        return self.mass * self.length * self.length / 12.0


@dataclass(frozen=True)
class CharacterModel:
    """Bone chain, actuation parameters and reference martial-arts pose."""

    bones: tuple
    reference_pose: np.ndarray
    root_y: float = 1.0

    def __post_init__(self):
        ref = np.asarray(self.reference_pose, dtype=float)
        object.__setattr__(self, "reference_pose", ref)
        packed = _pack(self)
        object.__setattr__(self, "_packed", packed)
        lo, hi = packed.q_lo, packed.q_hi
        if np.any(ref < lo) or np.any(ref > hi):
            raise ConfigError("reference pose violates joint limits")
        relax = packed.relax_pos
        object.__setattr__(
            self, "hand_relax_positions", (relax[0].copy(), relax[1].copy())
        )

    @property
    def joints(self) -> tuple:
        return tuple(b.joint for b in self.bones if b.joint is not None)

    @property
    def dynamic_bones(self) -> tuple:
        return tuple(b for b in self.bones if b.joint is not None)

    @property
    def n_joints(self) -> int:
        return len(self.dynamic_bones)

    @property
    def joint_limits(self):
        from .spline import JointLimits

        return JointLimits(lo=self.packed.q_lo.copy(), hi=self.packed.q_hi.copy())

    @property
    def packed(self) -> PackedModel:
        return self._packed

    @property
    def arm_length(self) -> float:
        by_name = {b.name: b for b in self.bones}
        upper = by_name.get("upperArmL")
        fore = by_name.get("foreArmL")
        if upper is None or fore is None:
            return 0.0
        return upper.length + fore.length


@dataclass
class CharacterState:
    root_x: float
    root_vx: float
    q: np.ndarray
    qdot: np.ndarray
    facing: int  # +1 faces +x, -1 faces -x

    def copy(self) -> "CharacterState":
        return CharacterState(self.root_x, self.root_vx,
                              self.q.copy(), self.qdot.copy(), self.facing)


@dataclass
class PunchStatus:
    """Projection of one character's active punch task into the world."""

    active: bool = False
    hand: Hand = Hand.LEFT
    target: TargetArea = TargetArea.HEAD
    flag: PunchFlag = PunchFlag.NOT_HAPPENED

    def copy(self) -> "PunchStatus":
        return PunchStatus(self.active, self.hand, self.target, self.flag)


@dataclass
class WorldState:
    characters: list
    punches: list
    clock: float = 0.0

    def copy(self) -> "WorldState":
        return WorldState([c.copy() for c in self.characters],
                          [p.copy() for p in self.punches], self.clock)


@dataclass(frozen=True)
class PunchEvent:
    attacker: int
    hand: Hand
    target: TargetArea
    relative_speed: float
    power: float

    def __post_init__(self):
        if not 1000.0 <= self.power <= 3000.0:
            raise ValueError(f"punch power {self.power} outside [1000, 3000]")


@dataclass(frozen=True)
class ContactPair:
    disc_a: str  # disc on character 0
    disc_b: str  # disc on character 1
    depth: float
    normal: np.ndarray  # from b to a, unit
    force_on_a: np.ndarray
    force_on_b: np.ndarray


@dataclass(frozen=True)
class BodyPose:
    """World-frame pose snapshot of one bone."""

    name: str
    anchor: np.ndarray
    tip: np.ndarray
    com: np.ndarray
    orientation: float
    com_velocity: np.ndarray
    angular_velocity: float


def _pack(model: CharacterModel) -> PackedModel:
    dyn = [b for b in model.bones if b.joint is not None]
    static = [b for b in model.bones if b.joint is None]
    names = [b.name for b in dyn]
    index = {n: i for i, n in enumerate(names)}
    nj = len(dyn)

    parent_bone = np.empty(nj, dtype=np.int64)
    for i, b in enumerate(dyn):
        j = b.joint
        if j.parent is None:
            parent_bone[i] = -1
        else:
            if j.parent not in index:
                raise ConfigError(f"joint '{j.name}' parent bone '{j.parent}'"
                                  " is not a jointed bone")
            parent_bone[i] = index[j.parent]
            if parent_bone[i] >= i:
                raise ConfigError("bones must be listed parents-first")

    anc = np.zeros((nj, nj), dtype=np.int8)
    for b in range(nj):
        k = b
        while k >= 0:
            anc[k, b] = 1
            k = parent_bone[k]
    anc_count = np.zeros(nj, dtype=np.int64)
    anc_list = np.zeros((nj, max(nj, 1)), dtype=np.int64)
    for b in range(nj):
        ks = np.flatnonzero(anc[:, b])  # ascending keeps M upper-triangular
        anc_count[b] = len(ks)
        anc_list[b, :len(ks)] = ks

    lengths = np.array([b.length for b in dyn])
    masses = np.array([b.mass for b in dyn])
    inertias = np.array([b.inertia for b in dyn])
    comfracs = np.array([b.com_fraction for b in dyn])
    rests = np.array([b.joint.rest_angle for b in dyn])
    anchor_fracs = np.array([b.joint.anchor_fraction for b in dyn])
    q_lo = np.array([b.joint.lo for b in dyn])
    q_hi = np.array([b.joint.hi for b in dyn])
    kp = np.array([b.joint.kp for b in dyn])
    kd = np.array([b.joint.kd for b in dyn])
    tau_max = np.array([b.joint.tau_max for b in dyn])

    ref = np.asarray(model.reference_pose, dtype=float)
    if ref.shape != (nj,):
        raise ConfigError(f"reference pose needs {nj} angles, got {ref.shape}")

    # reference absolute bone angles, for the pose-deviation cost
    ref_theta = np.empty(nj)
    for i in range(nj):
        pb = parent_bone[i]
        base = 0.0 if pb < 0 else ref_theta[pb]
        ref_theta[i] = base + rests[i] + ref[i]

    disc_bone = []
    disc_frac = []
    disc_radius = []
    disc_sx = []
    disc_sy = []
    static_mass = 0.0
    static_wy = 0.0
    for b in static:
        static_mass += b.mass
        # welded bones hang straight down from the root point
        com_y = model.root_y - b.com_fraction * b.length
        static_wy += b.mass * com_y
        if b.disc_radius > 0.0:
            disc_bone.append(-1)
            disc_frac.append(0.0)
            disc_radius.append(b.disc_radius)
            disc_sx.append(0.0)
            disc_sy.append(model.root_y - b.disc_fraction * b.length)
    for i, b in enumerate(dyn):
        if b.disc_radius > 0.0:
            disc_bone.append(i)
            disc_frac.append(b.disc_fraction)
            disc_radius.append(b.disc_radius)
            disc_sx.append(0.0)
            disc_sy.append(0.0)

    def disc_of(bone_name: str) -> int:
        for d, bi in enumerate(disc_bone):
            if bi >= 0 and dyn[bi].name == bone_name:
                return d
        return -1

    head_disc = -1
    chest_disc = -1
    fist = np.full(2, -1, dtype=np.int64)
    for d, bi in enumerate(disc_bone):
        if bi < 0:
            continue
        role = dyn[bi].role
        if role == "head" and head_disc < 0:
            head_disc = d
        elif role == "torso" and chest_disc < 0:
            chest_disc = d
    fist[0] = disc_of("foreArmL")
    fist[1] = disc_of("foreArmR")

    mdl = PackedModel(
        n_joints=nj,
        root_y=float(model.root_y),
        lengths=lengths, masses=masses, inertias=inertias,
        comfracs=comfracs, rests=rests, anchor_fracs=anchor_fracs,
        parent_bone=parent_bone, anc=anc,
        anc_count=anc_count, anc_list=anc_list,
        q_lo=q_lo, q_hi=q_hi, kp=kp, kd=kd, tau_max=tau_max,
        ref_pose=ref.copy(), ref_theta=ref_theta,
        disc_bone=np.array(disc_bone, dtype=np.int64),
        disc_frac=np.array(disc_frac, dtype=float),
        disc_radius=np.array(disc_radius, dtype=float),
        disc_sx=np.array(disc_sx, dtype=float),
        disc_sy=np.array(disc_sy, dtype=float),
        head_disc=head_disc, chest_disc=chest_disc, fist_disc=fist,
        relax_pos=np.zeros((2, 2)),
        static_mass=static_mass,
        static_com_y=static_wy / static_mass if static_mass > 0 else 0.0,
    )

    # relax position of each fist at the reference pose, canonical frame
    relax = np.zeros((2, 2))
    theta, _, ax, ay, _, _, _, _, _, _ = _fk_arrays(mdl, ref, np.zeros(nj))
    for h in range(2):
        d = fist[h]
        if d >= 0:
            bi = mdl.disc_bone[d]
            f = mdl.disc_frac[d] * mdl.lengths[bi]
            relax[h, 0] = ax[bi] + f * math.cos(theta[bi])
            relax[h, 1] = ay[bi] + f * math.sin(theta[bi])
    return mdl._replace(relax_pos=relax)


def _fk_arrays(mdl: PackedModel, q: np.ndarray, qdot: np.ndarray):
    nj = mdl.n_joints
    out = [np.empty(nj) for _ in range(10)]
    _dynamics.fk_chain(mdl, np.asarray(q, dtype=float),
                       np.asarray(qdot, dtype=float), *out)
    return out


def wrap_to_pi(x: float) -> float:
    y = x % (2.0 * math.pi)
    if y > math.pi:
        y -= 2.0 * math.pi
    return y


def pd_torque(q: float, qdot: float, target: float,
              kp: float, kd: float, tau_max: float) -> float:
    """Servo torque toward a target angle, clamped to the actuator limit."""
    tau = kp * wrap_to_pi(target - q) - kd * qdot
    return max(-tau_max, min(tau_max, tau))


def forward_kinematics(model: CharacterModel, state: CharacterState):
    """World-frame pose and velocity of every bone.

    Returns a list of BodyPose, welded bones first, then jointed bones in
    model order. Velocities include the root translation.
    """
    mdl = model.packed
    theta, omega, ax, ay, vax, vay, cx, cy, vcx, vcy = _fk_arrays(
        mdl, state.q, state.qdot)
    f = float(state.facing)
    rx, rvx = state.root_x, state.root_vx

    def to_world(px, py):
        return np.array([rx + f * px, py])

    def vel_world(vx, vy):
        return np.array([rvx + f * vx, vy])

    poses = []
    for b in model.bones:
        if b.joint is None:
            anchor = to_world(0.0, model.root_y)
            tip = to_world(0.0, model.root_y - b.length)
            com = to_world(0.0, model.root_y - b.com_fraction * b.length)
            poses.append(BodyPose(b.name, anchor, tip, com, -0.5 * math.pi,
                                  vel_world(0.0, 0.0), 0.0))
    dyn_names = [b.name for b in model.dynamic_bones]
    for i, name in enumerate(dyn_names):
        ln = mdl.lengths[i]
        tipx = ax[i] + ln * math.cos(theta[i])
        tipy = ay[i] + ln * math.sin(theta[i])
        # world orientation mirrors with facing
        orient = theta[i] if state.facing > 0 else math.pi - theta[i]
        poses.append(BodyPose(
            name,
            to_world(ax[i], ay[i]),
            to_world(tipx, tipy),
            to_world(cx[i], cy[i]),
            wrap_to_pi(orient),
            vel_world(vcx[i], vcy[i]),
            state.facing * omega[i],
        ))
    return poses


def hand_point(model: CharacterModel, state: CharacterState, hand: Hand):
    """World position and velocity of a fist centre."""
    mdl = model.packed
    d = mdl.fist_disc[int(hand)]
    if d < 0:
        raise ValueError("model has no fist disc for that hand")
    theta, omega, ax, ay, vax, vay, cx, cy, vcx, vcy = _fk_arrays(
        mdl, state.q, state.qdot)
    bi = mdl.disc_bone[d]
    fr = mdl.disc_frac[d] * mdl.lengths[bi]
    px = ax[bi] + fr * math.cos(theta[bi])
    py = ay[bi] + fr * math.sin(theta[bi])
    vx = vax[bi] - omega[bi] * (py - ay[bi])
    vy = vay[bi] + omega[bi] * (px - ax[bi])
    f = float(state.facing)
    pos = np.array([state.root_x + f * px, py])
    vel = np.array([state.root_vx + f * vx, vy])
    return pos, vel


def disc_snapshot(model: CharacterModel, state: CharacterState):
    """(names, world positions, world velocities, radii) of all discs."""
    mdl = model.packed
    nd = mdl.disc_bone.shape[0]
    theta, omega, ax, ay, vax, vay, cx, cy, vcx, vcy = _fk_arrays(
        mdl, state.q, state.qdot)
    px = np.empty(nd)
    py = np.empty(nd)
    vx = np.empty(nd)
    vy = np.empty(nd)
    _dynamics.disc_positions(mdl, theta, omega, ax, ay, vax, vay,
                             px, py, vx, vy)
    f = float(state.facing)
    pos = np.stack([state.root_x + f * px, py], axis=1)
    vel = np.stack([state.root_vx + f * vx, vy], axis=1)
    names = _disc_names(model)
    return names, pos, vel, mdl.disc_radius.copy()


def _disc_names(model: CharacterModel):
    names = []
    for b in model.bones:
        if b.joint is None and b.disc_radius > 0.0:
            names.append(b.name)
    for b in model.dynamic_bones:
        if b.disc_radius > 0.0:
            names.append(b.name)
    return names


def detect_contacts(model: CharacterModel, world: WorldState, config: Config):
    """Overlapping disc pairs between the two characters, plus any punch
    event the current instant would register.

    Pure query: punch flags in `world` are not advanced. A punch event
    needs an active punch status on the target, disc overlap of the tasked
    fist, approach speed at least `config.punch_min_speed`, and a flag
    still at NOT_HAPPENED.
    """
    names_a, pa, va, radii = disc_snapshot(model, world.characters[0])
    names_b, pb, vb, _ = disc_snapshot(model, world.characters[1])
    k, c = config.contact_stiffness, config.contact_damping
    pairs = []
    for i in range(len(names_a)):
        for j in range(len(names_b)):
            delta = pa[i] - pb[j]
            dist = float(np.hypot(delta[0], delta[1]))
            r = radii[i] + radii[j]
            if dist >= r or dist < 1e-6:
                continue
            n = delta / dist
            depth = r - dist
            depth_rate = -float(np.dot(va[i] - vb[j], n))
            fmag = max(0.0, k * depth + c * depth_rate)
            force = fmag * n
            pairs.append(ContactPair(names_a[i], names_b[j], depth, n,
                                     force, -force))

    events = []
    mdl = model.packed
    snaps = [(names_a, pa, va), (names_b, pb, vb)]
    for attacker in range(2):
        status = world.punches[attacker]
        if not status.active or status.flag != PunchFlag.NOT_HAPPENED:
            continue
        hd = int(mdl.fist_disc[int(status.hand)])
        td = int(mdl.head_disc if status.target == TargetArea.HEAD
                 else mdl.chest_disc)
        if hd < 0 or td < 0:
            continue
        _, ph, vh = snaps[attacker]
        _, pt, vt = snaps[1 - attacker]
        delta = ph[hd] - pt[td]
        dist = float(np.hypot(delta[0], delta[1]))
        if dist >= radii[hd] + radii[td] or dist < 1e-6:
            continue
        speed = -float(np.dot(vh[hd] - vt[td], delta / dist))
        if speed < config.punch_min_speed:
            continue
        power = min(3000.0, max(1000.0, 1000.0 * speed))
        events.append(PunchEvent(attacker, status.hand, status.target,
                                 speed, power))
    return pairs, events


def _pack_world(world: WorldState):
    nj = world.characters[0].q.shape[0]
    q = np.empty((2, nj))
    qdot = np.empty((2, nj))
    root_x = np.empty(2)
    root_vx = np.empty(2)
    facing = np.empty(2, dtype=np.int64)
    p_active = np.empty(2, dtype=np.int64)
    p_hand = np.empty(2, dtype=np.int64)
    p_target = np.empty(2, dtype=np.int64)
    p_flag = np.empty(2, dtype=np.int64)
    for c in range(2):
        st = world.characters[c]
        q[c] = st.q
        qdot[c] = st.qdot
        root_x[c] = st.root_x
        root_vx[c] = st.root_vx
        facing[c] = st.facing
        pu = world.punches[c]
        p_active[c] = 1 if pu.active else 0
        p_hand[c] = int(pu.hand)
        p_target[c] = int(pu.target)
        p_flag[c] = int(pu.flag)
    return q, qdot, root_x, root_vx, facing, p_active, p_hand, p_target, p_flag


def _unpack_world(world: WorldState, arrays, clock: float) -> WorldState:
    q, qdot, root_x, root_vx, facing, p_active, p_hand, p_target, p_flag = arrays
    chars = []
    punches = []
    for c in range(2):
        chars.append(CharacterState(float(root_x[c]), float(root_vx[c]),
                                    q[c].copy(), qdot[c].copy(),
                                    int(facing[c])))
        punches.append(PunchStatus(bool(p_active[c]), Hand(int(p_hand[c])),
                                   TargetArea(int(p_target[c])),
                                   PunchFlag(int(p_flag[c]))))
    return WorldState(chars, punches, clock)


def step_world(model: CharacterModel, world: WorldState,
               targets: Sequence[np.ndarray], root_commands: Sequence[float],
               config: Config):
    """Advance one control frame of Δt with the decided substepping.

    `targets` holds each character's per-joint PD targets for the frame,
    `root_commands` the commanded root velocities. Returns the successor
    world and the punch events registered during the frame. Raises
    SimulationDiverged when integration blows up.
    """
    arrays = _pack_world(world)
    q, qdot, root_x, root_vx, facing = arrays[:5]
    p_active, p_hand, p_target, p_flag = arrays[5:]
    tg = np.ascontiguousarray(np.asarray(targets, dtype=float))
    if tg.shape != q.shape:
        raise ValueError(f"targets shape {tg.shape}, expected {q.shape}")
    cmd = np.asarray(root_commands, dtype=float)
    events_arr = np.empty((2, 5))
    ws = _dynamics.make_workspace(model.packed.n_joints,
                                  model.packed.disc_bone.shape[0])
    status = _dynamics.step_frame(
        model.packed, q, qdot, root_x, root_vx, facing,
        p_active, p_hand, p_target, p_flag,
        tg, cmd, config.gravity, config.dt, config.n_substeps,
        config.contact_stiffness, config.contact_damping,
        config.punch_min_speed, config.root_min_gap,
        config.arena_half_width, events_arr, ws)
    if status != _dynamics.STATUS_OK:
        raise SimulationDiverged("non-finite state after step")
    new_world = _unpack_world(world, arrays, world.clock + config.dt)
    events = []
    for c in range(2):
        if events_arr[c, 0] >= 0:
            events.append(PunchEvent(
                attacker=c,
                hand=Hand(int(events_arr[c, 1])),
                target=TargetArea(int(events_arr[c, 2])),
                relative_speed=float(events_arr[c, 3]),
                power=float(events_arr[c, 4]),
            ))
    return new_world, events


def total_energy(model: CharacterModel, world: WorldState,
                 gravity: float = 9.81) -> float:
    """Kinetic plus gravitational potential energy of both characters.

    Potential is measured relative to the reference pose at rest, so a
    world sitting exactly at the reference pose with zero velocities
    reports zero.
    """
    mdl = model.packed
    total = 0.0
    ref_pe = _reference_potential(model, gravity)
    for c, st in enumerate(world.characters):
        theta, omega, ax, ay, vax, vay, cx, cy, vcx, vcy = _fk_arrays(
            mdl, st.q, st.qdot)
        for b in range(mdl.n_joints):
            vwx = st.root_vx + st.facing * vcx[b]
            vwy = vcy[b]
            total += 0.5 * mdl.masses[b] * (vwx * vwx + vwy * vwy)
            total += 0.5 * mdl.inertias[b] * omega[b] * omega[b]
            total += mdl.masses[b] * gravity * cy[b]
        if mdl.static_mass > 0.0:
            total += 0.5 * mdl.static_mass * st.root_vx * st.root_vx
            total += mdl.static_mass * gravity * mdl.static_com_y
        total -= ref_pe
    return total


def _reference_potential(model: CharacterModel, gravity: float) -> float:
    mdl = model.packed
    theta, omega, ax, ay, vax, vay, cx, cy, vcx, vcy = _fk_arrays(
        mdl, mdl.ref_pose, np.zeros(mdl.n_joints))
    pe = float(np.dot(mdl.masses, cy)) * gravity
    if mdl.static_mass > 0.0:
        pe += mdl.static_mass * gravity * mdl.static_com_y
    return pe


def default_character(config: Optional[Config] = None) -> CharacterModel:
    """The standard sparring rig: pelvis, torso, head, two-segment arms."""
    cfg = config or Config()
    kp, kd, tq = cfg.pd_kp, cfg.pd_kd, cfg.torque_limit
    tkp, tkd, ttq = cfg.torso_pd_kp, cfg.torso_pd_kd, cfg.torso_torque_limit
    half_pi = 0.5 * math.pi
    bones = (
        Bone("pelvis", 0.15, 15.0, "torso", disc_radius=0.13,
             disc_fraction=0.5),
        Bone("torso", 0.45, 20.0, "torso", disc_radius=0.16,
             disc_fraction=0.55,
             joint=Joint("torsoLean", None, 0.0, half_pi,
                         -0.6, 0.6, tkp, tkd, ttq)),
        Bone("head", 0.24, 5.0, "head", disc_radius=0.11, disc_fraction=0.75,
             joint=Joint("neck", "torso", 1.0, 0.0,
                         -0.7, 0.7, kp, kd, tq)),
        Bone("upperArmL", 0.30, 2.5, "upperArm", disc_radius=0.055,
             joint=Joint("shoulderL", "torso", 0.93, -math.pi,
                         -0.5, 2.8, kp, kd, tq)),
        Bone("foreArmL", 0.30, 2.0, "foreArm", disc_radius=0.06,
             disc_fraction=1.0,
             joint=Joint("elbowL", "upperArmL", 1.0, 0.0,
                         0.0, 2.6, kp, kd, tq)),
        Bone("upperArmR", 0.30, 2.5, "upperArm", disc_radius=0.055,
             joint=Joint("shoulderR", "torso", 0.93, -math.pi,
                         -0.5, 2.8, kp, kd, tq)),
        Bone("foreArmR", 0.30, 2.0, "foreArm", disc_radius=0.06,
             disc_fraction=1.0,
             joint=Joint("elbowR", "upperArmR", 1.0, 0.0,
                         0.0, 2.6, kp, kd, tq)),
    )
    # guard pose: both fists up and forward; keeping the arms symmetric
    # keeps punches with either hand equally in reach of either target
    # (a tucked rear arm left rear-hand head punches outside what the
    # per-frame search budget reliably finds)
    reference = np.array([0.0, 0.0, 0.65, 2.05, 0.65, 2.1])
    return CharacterModel(bones=bones, reference_pose=reference)


def pendulum_model(length: float = 1.0, mass: float = 1.0,
                   kp: float = 0.0, kd: float = 0.0,
                   tau_max: float = 0.0) -> CharacterModel:
    """Single hanging rod, unactuated by default. Test instrument."""
    bones = (
        Bone("rod", length, mass, "torso",
             joint=Joint("pivot", None, 0.0, -0.5 * math.pi,
                         -math.pi, math.pi, kp, kd, tau_max)),
    )
    return CharacterModel(bones=bones, reference_pose=np.zeros(1))


def unactuated(model: CharacterModel) -> CharacterModel:
    """Copy of a model with all gains zeroed: free multi-pendulum."""
    bones = []
    for b in model.bones:
        if b.joint is None:
            bones.append(b)
        else:
            j = dataclasses.replace(b.joint, kp=0.0, kd=0.0, tau_max=0.0)
            bones.append(dataclasses.replace(b, joint=j))
    return CharacterModel(bones=tuple(bones),
                          reference_pose=model.reference_pose.copy(),
                          root_y=model.root_y)


def spawn_world(model: CharacterModel, config: Optional[Config] = None) -> WorldState:
    """Two characters at the reference pose, facing each other."""
    cfg = config or Config()
    half = 0.5 * cfg.spawn_gap
    nj = model.n_joints
    chars = [
        CharacterState(-half, 0.0, model.reference_pose.copy(),
                       np.zeros(nj), +1),
        CharacterState(half, 0.0, model.reference_pose.copy(),
                       np.zeros(nj), -1),
    ]
    return WorldState(chars, [PunchStatus(), PunchStatus()], 0.0)


def model_from_dict(data: dict) -> CharacterModel:
    """Build a character model from plain config data."""
    try:
        bones = []
        for bd in data["bones"]:
            joint = None
            if "joint" in bd:
                jd = bd["joint"]
                joint = Joint(
                    name=jd["name"], parent=jd.get("parent"),
                    anchor_fraction=float(jd.get("anchor_fraction", 1.0)),
                    rest_angle=float(jd.get("rest_angle", 0.0)),
                    lo=float(jd["lo"]), hi=float(jd["hi"]),
                    kp=float(jd["kp"]), kd=float(jd["kd"]),
                    tau_max=float(jd["tau_max"]),
                )
            bones.append(Bone(
                name=bd["name"], length=float(bd["length"]),
                mass=float(bd["mass"]), role=bd["role"],
                disc_radius=float(bd.get("disc_radius", 0.0)),
                disc_fraction=float(bd.get("disc_fraction", 0.5)),
                com_fraction=float(bd.get("com_fraction", 0.5)),
                joint=joint,
            ))
        return CharacterModel(
            bones=tuple(bones),
            reference_pose=np.asarray(data["reference_pose"], dtype=float),
            root_y=float(data.get("root_y", 1.0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad character model data: {exc}") from exc

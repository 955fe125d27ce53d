"""Planner tests.

The rollout kernel is the one piece of the optimizer that cannot be
checked by inspection, so the heart of this module is a second rollout
implementation written against the public simulator API: step the world
frame by frame, evolve the task by the match rules, score each visited
state with the plain cost functions. The batch kernel must agree with it
to float precision on every scenario we can think of.
"""

import math

import numpy as np
import pytest

from pugil import cmaes, sim, spline
from pugil.config import Config
from pugil.control import (
    Planner,
    Task,
    TaskKind,
    decode_plan,
    default_plan,
    make_seeds,
    move_cost,
    plan_dimension,
    pose_cost,
    punch_cost,
    punch_power,
    rollout_fitness,
    seed_std,
    shift_plan,
    state_fitness,
)
from pugil.sim import Hand, PunchFlag, PunchStatus, TargetArea


@pytest.fixture(scope="module")
def cfg():
    return Config()


@pytest.fixture(scope="module")
def model(cfg):
    return sim.default_character(cfg)


def spawn(model, cfg, gap=None):
    w = sim.spawn_world(model, cfg)
    if gap is not None:
        w.characters[0].root_x = -gap / 2
        w.characters[1].root_x = gap / 2
    return w


# ------------------------------------------------------------ cost units

# Rotating one joint turns that bone and everything distal to it, so a
# single joint offset shows up once per descendant in the pose sum.
JOINT_BONE_COUNT = {
    0: 6,  # torso lean carries the whole upper body
    1: 1,  # neck: head only
    2: 2,  # left shoulder: upper arm + forearm
    3: 1,  # left elbow: forearm only
    4: 2,
    5: 1,
}


class TestPoseCost:
    def test_reference_pose_is_free(self, model, cfg):
        w = spawn(model, cfg)
        assert pose_cost(model, w.characters[0], cfg) == pytest.approx(0, abs=1e-12)

    @pytest.mark.parametrize("joint,count", sorted(JOINT_BONE_COUNT.items()))
    def test_one_tolerance_costs_one_per_moved_bone(self, model, cfg, joint, count):
        w = spawn(model, cfg)
        st = w.characters[0]
        st.q = model.reference_pose.copy()
        st.q[joint] += cfg.pose_tolerance_rad
        assert pose_cost(model, st, cfg) == pytest.approx(count, abs=1e-9)

    def test_two_elbows_forty_degrees(self, model, cfg):
        w = spawn(model, cfg)
        st = w.characters[0]
        st.q = model.reference_pose.copy()
        st.q[3] -= 2 * cfg.pose_tolerance_rad
        st.q[5] -= 2 * cfg.pose_tolerance_rad
        assert pose_cost(model, st, cfg) == pytest.approx(8.0, abs=1e-9)

    def test_mirrored_character_same_cost(self, model, cfg):
        w = spawn(model, cfg)
        a, b = w.characters
        a.q = model.reference_pose + np.array([0.1, -0.2, 0.3, 0, -0.1, 0.2])
        b.q = a.q.copy()
        assert pose_cost(model, a, cfg) == pytest.approx(
            pose_cost(model, b, cfg), abs=1e-9)


class TestMoveCost:
    def test_at_target_zero(self, model, cfg):
        w = spawn(model, cfg)
        pos, _ = sim.hand_point(model, w.characters[0], Hand.RIGHT)
        assert move_cost(model, w.characters[0], Hand.RIGHT, pos, cfg) == 0

    @pytest.mark.parametrize("cm,expect", [(2, 1.0), (6, 9.0), (4, 4.0)])
    def test_distance_ratio_squared(self, model, cfg, cm, expect):
        w = spawn(model, cfg)
        pos, _ = sim.hand_point(model, w.characters[0], Hand.RIGHT)
        target = pos + np.array([0.0, cm / 100.0])
        got = move_cost(model, w.characters[0], Hand.RIGHT, target, cfg)
        assert got == pytest.approx(expect, rel=1e-9)


class TestPunchPower:
    @pytest.mark.parametrize("v,expect", [(0.5, 1000), (2.0, 2000),
                                          (5.0, 3000), (1.0, 1000),
                                          (2.9999, 2999.9)])
    def test_linear_with_clamp(self, v, expect):
        assert punch_power(v) == pytest.approx(expect)

    def test_monotone(self):
        speeds = np.linspace(0, 6, 50)
        powers = [punch_power(s) for s in speeds]
        assert all(b >= a for a, b in zip(powers, powers[1:]))


class TestPunchCost:
    def test_windup_formula(self, model, cfg):
        w = spawn(model, cfg, gap=0.9)
        task = Task.punch(Hand.LEFT, TargetArea.HEAD)
        w.punches[0] = PunchStatus(True, Hand.LEFT, TargetArea.HEAD,
                                   PunchFlag.NOT_HAPPENED)
        pos, vel = sim.hand_point(model, w.characters[0], Hand.LEFT)
        names, centers, _, _ = sim.disc_snapshot(model, w.characters[1])
        target = centers[names.index("head")]
        direction = (target - pos) / np.hypot(*(target - pos))
        wish = cfg.punch_speed_desired * direction
        expect = (np.hypot(*(vel - wish)) / cfg.hand_velocity_tolerance) ** 2
        assert punch_cost(model, w, 0, task, cfg) == pytest.approx(expect, rel=1e-9)

    def test_landing_frame_rewards_power(self, model, cfg):
        w = spawn(model, cfg)
        task = Task.punch(Hand.RIGHT, TargetArea.CHEST)
        w.punches[0] = PunchStatus(True, Hand.RIGHT, TargetArea.CHEST,
                                   PunchFlag.HAPPENED_NOW)
        st = w.characters[0]
        st.qdot = np.array([0.0, 0.0, 0.0, 0.0, 2.0, 0.0])
        _, vel = sim.hand_point(model, st, Hand.RIGHT)
        assert punch_cost(model, w, 0, task, cfg) == pytest.approx(
            -punch_power(float(np.hypot(*vel))), rel=1e-9)

    def test_return_phase_measures_local_offset(self, model, cfg):
        w = spawn(model, cfg)
        task = Task.punch(Hand.LEFT, TargetArea.HEAD)
        w.punches[0] = PunchStatus(True, Hand.LEFT, TargetArea.HEAD,
                                   PunchFlag.HAPPENED_BEFORE)
        st = w.characters[0]
        pos, _ = sim.hand_point(model, st, Hand.LEFT)
        local = np.array([st.facing * (pos[0] - st.root_x), pos[1]])
        relax = model.hand_relax_positions[int(Hand.LEFT)]
        expect = (np.hypot(*(local - relax)) / cfg.hand_relax_tolerance) ** 2
        assert punch_cost(model, w, 0, task, cfg) == pytest.approx(expect, rel=1e-9)

    def test_return_phase_invariant_under_root_motion(self, model, cfg):
        # relax offset lives in the character frame, so sliding the root
        # must not change it
        w = spawn(model, cfg)
        task = Task.punch(Hand.LEFT, TargetArea.HEAD)
        w.punches[0] = PunchStatus(True, Hand.LEFT, TargetArea.HEAD,
                                   PunchFlag.HAPPENED_BEFORE)
        before = punch_cost(model, w, 0, task, cfg)
        w.characters[0].root_x += 0.37
        assert punch_cost(model, w, 0, task, cfg) == pytest.approx(before, rel=1e-12)


class TestStateFitness:
    def test_negated_sum(self, model, cfg):
        w = spawn(model, cfg)
        st = w.characters[0]
        st.q = model.reference_pose + 0.1
        pos, _ = sim.hand_point(model, st, Hand.LEFT)
        task = Task.move(Hand.LEFT, pos + np.array([0.05, 0.0]))
        expect = -(pose_cost(model, st, cfg)
                   + move_cost(model, st, Hand.LEFT, task.move_point, cfg))
        assert state_fitness(model, w, 0, task, cfg) == pytest.approx(expect, rel=1e-12)

    def test_null_ignores_operands(self, model, cfg):
        w = spawn(model, cfg)
        assert state_fitness(model, w, 0, Task.null(), cfg) == pytest.approx(
            -pose_cost(model, w.characters[0], cfg), rel=1e-12)


# ------------------------------------------------- dual-route rollout

def python_rollout(model, world, self_index, task, root_commands, vector,
                   cfg, opp_plan=None):
    """Reference rollout: public-API stepping plus match-rule task
    evolution, written independently of the batch kernel."""
    w = world.copy()
    sp = decode_plan(vector, model, cfg)
    guard = model.reference_pose
    opp = 1 - self_index

    task_on = task.kind != TaskKind.NULL
    prev_flag = w.punches[self_index].flag
    if task_on:
        pos, _ = sim.hand_point(model, w.characters[self_index], task.hand)
        prev_hand = pos

    total = 0.0
    for k in range(1, cfg.n_rollout_steps + 1):
        if task_on:
            age = task.age(world.clock) + (k - 1) * cfg.dt
            done = age > cfg.max_task_duration + 1e-12
            if not done and task.kind == TaskKind.MOVE:
                done = (np.hypot(*(prev_hand - task.move_point))
                        <= cfg.move_tolerance)
            if not done and task.kind == TaskKind.PUNCH:
                if prev_flag == PunchFlag.HAPPENED_BEFORE:
                    st = w.characters[self_index]
                    local = np.array(
                        [st.facing * (prev_hand[0] - st.root_x), prev_hand[1]])
                    relax = model.hand_relax_positions[int(task.hand)]
                    done = (np.hypot(*(local - relax))
                            <= 4.0 * cfg.hand_relax_tolerance)
            if done:
                task_on = False
                if task.kind == TaskKind.PUNCH:
                    w.punches[self_index].active = False

        t = k * cfg.dt
        targets = np.empty((2, model.n_joints))
        targets[self_index] = spline.evaluate(sp, t)
        if opp_plan is None:
            targets[opp] = guard
        else:
            targets[opp] = spline.evaluate(opp_plan, min(t, cfg.opponent_horizon))
        w, _ = sim.step_world(model, w, targets, root_commands, cfg)

        eff = task if task_on else Task.null()
        total += state_fitness(model, w, self_index, eff, cfg)
        if task_on:
            prev_flag = w.punches[self_index].flag
            prev_hand, _ = sim.hand_point(model, w.characters[self_index],
                                          task.hand)
    return total / cfg.n_rollout_steps


def random_vector(model, cfg, rng, scale=1.0):
    return default_plan(model, cfg) + scale * seed_std(model, cfg) \
        * rng.standard_normal(plan_dimension(model, cfg))


class TestRolloutAgainstReference:
    def check(self, model, cfg, world, task, vector, opp_plan=None,
              root=(0.0, 0.0)):
        root = np.asarray(root, float)
        a = rollout_fitness(model, world, 0, task, root, vector, cfg,
                            opp_plan=opp_plan)
        b = python_rollout(model, world, 0, task, root, vector, cfg,
                           opp_plan=opp_plan)
        assert a == pytest.approx(b, abs=1e-9)

    def test_null_task_random_candidates(self, model, cfg):
        rng = np.random.default_rng(11)
        w = spawn(model, cfg)
        for _ in range(4):
            self.check(model, cfg, w, Task.null(), random_vector(model, cfg, rng))

    def test_move_task_with_completion(self, model, cfg):
        rng = np.random.default_rng(12)
        w = spawn(model, cfg)
        pos, _ = sim.hand_point(model, w.characters[0], Hand.RIGHT)
        near = Task.move(Hand.RIGHT, pos + np.array([0.01, 0.0]))
        far = Task.move(Hand.RIGHT, pos + np.array([0.15, 0.05]))
        for task in (near, far):
            for _ in range(3):
                self.check(model, cfg, w, task, random_vector(model, cfg, rng))

    def test_punch_task_all_starting_flags(self, model, cfg):
        rng = np.random.default_rng(13)
        w = spawn(model, cfg, gap=0.52)
        w.characters[1].q = np.zeros(model.n_joints)
        opp_plan = spline.constant_spline(np.zeros(model.n_joints), cfg.horizon)
        task = Task.punch(Hand.LEFT, TargetArea.CHEST)
        for flag in (PunchFlag.NOT_HAPPENED, PunchFlag.HAPPENED_NOW,
                     PunchFlag.HAPPENED_BEFORE):
            w.punches[0] = PunchStatus(True, Hand.LEFT, TargetArea.CHEST, flag)
            for _ in range(3):
                self.check(model, cfg, w, task,
                           random_vector(model, cfg, rng), opp_plan=opp_plan)

    def test_punch_candidate_that_lands(self, model, cfg):
        # drive the left fist through the chest mid-rollout so the hit,
        # reward frame and return phase all occur inside the horizon
        w = spawn(model, cfg, gap=0.52)
        w.characters[1].q = np.zeros(model.n_joints)
        w.punches[0] = PunchStatus(True, Hand.LEFT, TargetArea.CHEST,
                                   PunchFlag.NOT_HAPPENED)
        opp_plan = spline.constant_spline(np.zeros(model.n_joints), cfg.horizon)
        task = Task.punch(Hand.LEFT, TargetArea.CHEST)
        guard = model.reference_pose
        strike = guard.copy()
        strike[3] -= 0.4  # open the left elbow into the chest
        times = np.array([0.0, 0.3, cfg.horizon])
        v = np.concatenate([[times[0]], guard, [times[1]], strike,
                            [times[2]], guard])
        kernel = rollout_fitness(model, w, 0, task, np.zeros(2), v, cfg,
                                 opp_plan=opp_plan)
        assert kernel > 0  # the landing is what makes it profitable
        self.check(model, cfg, w, task, v, opp_plan=opp_plan)

    def test_task_ages_out_mid_rollout(self, model, cfg):
        rng = np.random.default_rng(14)
        w = spawn(model, cfg, gap=0.52)
        w.punches[0] = PunchStatus(True, Hand.LEFT, TargetArea.CHEST,
                                   PunchFlag.NOT_HAPPENED)
        # 0.2 s of life left: the deadline lands at step 6 of 18
        w.clock = 5.0
        task = Task.punch(Hand.LEFT, TargetArea.CHEST,
                          started_at=5.0 - (cfg.max_task_duration - 0.2))
        for _ in range(3):
            self.check(model, cfg, w, task, random_vector(model, cfg, rng))

    def test_expired_task_scores_like_null(self, model, cfg):
        w = spawn(model, cfg)
        w.clock = 3.0
        dead = Task.move(Hand.LEFT, np.array([2.0, 1.5]), started_at=1.0)
        v = default_plan(model, cfg)
        f_dead = rollout_fitness(model, w, 0, dead, np.zeros(2), v, cfg)
        f_null = rollout_fitness(model, w, 0, Task.null(), np.zeros(2), v, cfg)
        assert f_dead == pytest.approx(f_null, abs=1e-12)

    def test_opponent_freeze_beyond_horizon(self, model, cfg):
        # opponent splines that agree on [0, opponent horizon] but differ
        # beyond it must produce identical rollouts
        w = spawn(model, cfg)
        guard = model.reference_pose
        wave = guard + 0.4
        a = spline.spline_from_arrays(
            np.array([0.0, cfg.opponent_horizon, cfg.horizon]),
            np.stack([guard, guard, wave]))
        b = spline.spline_from_arrays(
            np.array([0.0, cfg.opponent_horizon, cfg.horizon]),
            np.stack([guard, guard, guard]))
        v = default_plan(model, cfg)
        task = Task.null()
        fa = rollout_fitness(model, w, 0, task, np.zeros(2), v, cfg, opp_plan=a)
        fb = rollout_fitness(model, w, 0, task, np.zeros(2), v, cfg, opp_plan=b)
        assert fa == pytest.approx(fb, abs=1e-12)

    def test_root_commands_respected(self, model, cfg):
        rng = np.random.default_rng(15)
        w = spawn(model, cfg)
        v = random_vector(model, cfg, rng, scale=0.3)
        self.check(model, cfg, w, Task.null(), v, root=(0.3, -0.3))

    def test_hold_guard_near_zero(self, model, cfg):
        # not exactly zero: proportional control droops a little under
        # gravity, which the pose term charges for
        w = spawn(model, cfg)
        f = rollout_fitness(model, w, 0, Task.null(), np.zeros(2),
                            default_plan(model, cfg), cfg)
        assert -1.0 < f <= 0.0


# ------------------------------------------------------------- seeding

class TestSeeding:
    def test_quota_reassignment(self, model, cfg):
        base = default_plan(model, cfg)
        for stored in (0, 1, 3):
            retained = [base + i for i in range(stored)]
            seeds = make_seeds(retained, model, cfg)
            assert len(seeds) == cfg.n_last_best + cfg.n_default_pose
            lb = [s for s in seeds if s.origin == cmaes.ORIGIN_LAST_BEST]
            dp = [s for s in seeds if s.origin == cmaes.ORIGIN_DEFAULT_POSE]
            assert len(lb) == stored
            assert len(dp) == 6 - stored
            for i, s in enumerate(lb):
                assert np.array_equal(s.mean, retained[i])
            for s in dp:
                assert np.array_equal(s.mean, base)

    def test_default_plan_holds_guard(self, model, cfg):
        sp = decode_plan(default_plan(model, cfg), model, cfg)
        for t in np.linspace(0, cfg.horizon, 7):
            assert np.allclose(spline.evaluate(sp, t), model.reference_pose,
                               atol=1e-12)

    def test_shift_rebases_one_frame(self, model, cfg):
        # first knot exactly one frame in, so re-basing moves it to zero
        # without the clamp distorting the leading segment
        rng = np.random.default_rng(21)
        poses = model.reference_pose + rng.uniform(-0.3, 0.3, (3, model.n_joints))
        times = [cfg.dt, 0.31, cfg.horizon]
        v = np.concatenate([np.concatenate([[t], p])
                            for t, p in zip(times, poses)])
        sp = decode_plan(v, model, cfg)
        shifted = decode_plan(shift_plan(v, model, cfg), model, cfg)
        for t in np.linspace(0, cfg.horizon - cfg.dt, 9):
            assert np.allclose(spline.evaluate(shifted, t),
                               spline.evaluate(sp, t + cfg.dt), atol=1e-9)

    def test_seed_std_shape_and_values(self, model, cfg):
        std = seed_std(model, cfg)
        assert std.shape == (plan_dimension(model, cfg),)
        per_knot = model.n_joints + 1
        assert np.allclose(std[0::per_knot], 0.1 * cfg.horizon)
        joint_std = np.delete(std, np.arange(0, std.size, per_knot))
        assert np.allclose(joint_std, cfg.pose_tolerance_rad)


# ------------------------------------------------------------- planner

class TestPlanner:
    def test_deterministic_given_seed(self, model, cfg):
        w = spawn(model, cfg)
        task = Task.null()
        results = []
        for _ in range(2):
            pl = Planner(model, cfg, 0, seed=42)
            results.append(pl.plan(w, task, 0.0))
        assert np.array_equal(results[0].vector, results[1].vector)
        assert results[0].fitness == results[1].fitness

    def test_budget_and_monotone_bests(self, model, cfg):
        w = spawn(model, cfg)
        pl = Planner(model, cfg, 0, seed=1)
        res = pl.plan(w, Task.null(), 0.0)
        assert res.n_rollouts == cfg.n_cma_updates * cfg.n_population
        assert len(res.update_bests) == cfg.n_cma_updates
        assert all(b >= a - 1e-15 for a, b in
                   zip(res.update_bests, res.update_bests[1:]))
        assert res.fitness == res.update_bests[-1]

    def test_executed_action_comes_from_best_plan(self, model, cfg):
        w = spawn(model, cfg)
        pl = Planner(model, cfg, 0, seed=7)
        res = pl.plan(w, Task.null(), 0.0)
        assert np.allclose(res.targets, spline.evaluate(res.plan, cfg.dt),
                           atol=1e-12)
        lim = model.joint_limits
        assert np.all(res.targets >= lim.lo - 1e-12)
        assert np.all(res.targets <= lim.hi + 1e-12)

    def test_task_change_restarts_distribution(self, model, cfg):
        w = spawn(model, cfg)
        pl = Planner(model, cfg, 0, seed=5)
        pl.plan(w, Task.null(), 0.0)
        assert pl._cma.generation == cfg.n_cma_updates
        pl.plan(w, Task.null(), 0.0)
        assert pl._cma.generation == 2 * cfg.n_cma_updates
        pos, _ = sim.hand_point(model, w.characters[0], Hand.LEFT)
        pl.plan(w, Task.move(Hand.LEFT, pos + 0.05), 0.0)
        assert pl._cma.generation == cfg.n_cma_updates

    def test_aging_same_task_does_not_restart(self, model, cfg):
        w = spawn(model, cfg)
        pos, _ = sim.hand_point(model, w.characters[0], Hand.LEFT)
        pl = Planner(model, cfg, 0, seed=5)
        pl.plan(w, Task.move(Hand.LEFT, pos + 0.05, started_at=0.0), 0.0)
        w2 = w.copy()
        w2.clock += cfg.dt
        pl.plan(w2, Task.move(Hand.LEFT, pos + 0.05, started_at=0.0), 0.0)
        assert pl._cma.generation == 2 * cfg.n_cma_updates

    def test_retains_at_most_n_last_best(self, model, cfg):
        w = spawn(model, cfg)
        pl = Planner(model, cfg, 0, seed=9)
        for _ in range(5):
            pl.plan(w, Task.null(), 0.0)
        assert len(pl._last_best) == cfg.n_last_best

    def test_hold_is_floor_for_stationary_move(self, model, cfg):
        # target at the current hand position: holding still is already
        # optimal, so the planner must do at least that well
        w = spawn(model, cfg)
        pos, _ = sim.hand_point(model, w.characters[0], Hand.RIGHT)
        task = Task.move(Hand.RIGHT, pos)
        hold = rollout_fitness(model, w, 0, task, np.zeros(2),
                               default_plan(model, cfg), cfg)
        pl = Planner(model, cfg, 0, seed=2)
        res = pl.plan(w, task, 0.0)
        assert res.fitness >= hold - 1e-9


# --------------------------------------------------------- closed loop

class TestClosedLoop:
    def test_move_reaches_target(self, model, cfg):
        w = spawn(model, cfg)
        pos, _ = sim.hand_point(model, w.characters[0], Hand.RIGHT)
        target = pos + np.array([w.characters[0].facing * 0.15, 0.05])
        task = Task.move(Hand.RIGHT, target, started_at=w.clock)
        pl = Planner(model, cfg, 0, seed=0)
        guard = model.reference_pose
        for _ in range(30):
            res = pl.plan(w, task, 0.0)
            w, _ = sim.step_world(model, w, np.stack([res.targets, guard]),
                                  np.zeros(2), cfg)
            hand, _ = sim.hand_point(model, w.characters[0], Hand.RIGHT)
            if np.hypot(*(hand - target)) < 2 * cfg.move_tolerance:
                return
        pytest.fail("hand never reached the move target")

    def test_punch_lands_within_task_lifetime(self, model, cfg):
        w = spawn(model, cfg, gap=0.52)
        w.characters[1].q = np.zeros(model.n_joints)
        w.punches[0] = PunchStatus(True, Hand.LEFT, TargetArea.CHEST,
                                   PunchFlag.NOT_HAPPENED)
        task = Task.punch(Hand.LEFT, TargetArea.CHEST, started_at=w.clock)
        opp_pose = np.zeros(model.n_joints)
        opp_plan = spline.constant_spline(opp_pose, cfg.horizon)
        pl = Planner(model, cfg, 0, seed=3)
        for _ in range(15):
            res = pl.plan(w, task, 0.0, opp_plan=opp_plan)
            w, events = sim.step_world(model, w, np.stack([res.targets, opp_pose]),
                                       np.zeros(2), cfg)
            hits = [e for e in events if e.attacker == 0]
            if hits:
                assert 1000 <= hits[0].power <= 3000
                return
        pytest.fail("no punch landed inside one task lifetime")

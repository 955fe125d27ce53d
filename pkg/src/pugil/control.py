"""Rolling-horizon planner: per-frame CMA-ES over joint-target splines.

Each control frame the planner runs a handful of CMA-ES updates on a flat
spline parameter vector, simulating every candidate forward over the
planning horizon and scoring the visited states. The first action of the
best plan is handed to the simulator; the best vector is kept, shifted one
frame, and re-injected as a seed next time. Costs exist twice on purpose:
the batch kernels score rollouts, and the plain functions here score real
states for the game layer. They must agree to float precision, and the
tests hold them to that.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _dynamics, cmaes, spline
from .cmaes import Seed
from .config import Config
from .sim import (
    CharacterModel,
    CharacterState,
    Hand,
    PunchFlag,
    TargetArea,
    WorldState,
    _pack_world,
    disc_snapshot,
    forward_kinematics,
    hand_point,
    wrap_to_pi,
)
from .spline import ControlSpline


class TaskKind(enum.IntEnum):
    NULL = 0
    MOVE = 1
    PUNCH = 2


@dataclass(frozen=True)
class Task:
    """What the planner is currently optimizing for.

    NULL holds the guard pose. MOVE steers one fist to a world-space
    point. PUNCH drives one fist through the opponent's head or chest
    and back to its relaxed guard position.
    """

    kind: TaskKind = TaskKind.NULL
    hand: Hand = Hand.LEFT
    target_area: TargetArea = TargetArea.HEAD
    move_point: Optional[np.ndarray] = None
    started_at: float = 0.0

    @staticmethod
    def null() -> "Task":
        return Task()

    @staticmethod
    def move(hand: Hand, point: np.ndarray,
             started_at: float = 0.0) -> "Task":
        return Task(TaskKind.MOVE, hand, move_point=np.asarray(point, float),
                    started_at=started_at)

    @staticmethod
    def punch(hand: Hand, area: TargetArea,
              started_at: float = 0.0) -> "Task":
        return Task(TaskKind.PUNCH, hand, area, started_at=started_at)

    def age(self, clock: float) -> float:
        return max(0.0, clock - self.started_at)

    def signature(self) -> tuple:
        # started_at excluded: an aging task is still the same task
        pt = None if self.move_point is None else tuple(self.move_point)
        return (int(self.kind), int(self.hand), int(self.target_area), pt)


# ------------------------------------------------------- state scoring

def punch_power(speed: float) -> float:
    """Rated impact power of a punch landing at `speed` m/s."""
    return min(3000.0, max(1000.0, 1000.0 * speed))


def _canonical_orientations(model: CharacterModel, state: CharacterState):
    poses = {p.name: p for p in forward_kinematics(model, state)}
    out = np.empty(model.n_joints)
    for i, b in enumerate(model.dynamic_bones):
        o = poses[b.name].orientation
        out[i] = o if state.facing > 0 else math.pi - o
    return out


def pose_cost(model: CharacterModel, state: CharacterState,
              config: Config) -> float:
    """Squared deviation of every bone orientation from the guard pose."""
    theta = _canonical_orientations(model, state)
    tol = config.pose_tolerance_rad
    cost = 0.0
    for dev, ref in zip(theta, model.packed.ref_theta):
        d = wrap_to_pi(dev - ref)
        cost += (d / tol) ** 2
    return cost


def move_cost(model: CharacterModel, state: CharacterState, hand: Hand,
              point: np.ndarray, config: Config) -> float:
    pos, _ = hand_point(model, state, hand)
    d = float(np.hypot(*(pos - point)))
    return (d / config.move_tolerance) ** 2


def punch_cost(model: CharacterModel, world: WorldState, self_index: int,
               task: Task, config: Config) -> float:
    """Phase-dependent punch shaping term for one character.

    Before the hit: track a velocity of fixed magnitude aimed at the
    target. The frame the hit registers: reward the rated power. After:
    pull the fist back to its relaxed position, measured in the
    character's own frame.
    """
    st = world.characters[self_index]
    opp = world.characters[1 - self_index]
    flag = world.punches[self_index].flag
    pos, vel = hand_point(model, st, task.hand)

    if flag == PunchFlag.NOT_HAPPENED:
        mdl = model.packed
        td = int(mdl.head_disc if task.target_area == TargetArea.HEAD
                 else mdl.chest_disc)
        _, dp, _, _ = disc_snapshot(model, opp)
        target = dp[td]
        delta = target - pos
        d = float(np.hypot(*delta))
        if d > 1e-9:
            wish = config.punch_speed_desired * delta / d
        else:
            wish = np.zeros(2)
        err = float(np.hypot(*(vel - wish)))
        return (err / config.hand_velocity_tolerance) ** 2

    if flag == PunchFlag.HAPPENED_NOW:
        return -punch_power(float(np.hypot(*vel)))

    # return phase: relax target lives in the character's own frame
    local = np.array([st.facing * (pos[0] - st.root_x), pos[1]])
    relax = model.hand_relax_positions[int(task.hand)]
    d = float(np.hypot(*(local - relax)))
    return (d / config.hand_relax_tolerance) ** 2


def state_fitness(model: CharacterModel, world: WorldState, self_index: int,
                  task: Task, config: Config) -> float:
    """Negated total cost of one character's current state."""
    st = world.characters[self_index]
    cost = pose_cost(model, st, config)
    if task.kind == TaskKind.MOVE:
        cost += move_cost(model, st, task.hand, task.move_point, config)
    elif task.kind == TaskKind.PUNCH:
        cost += punch_cost(model, world, self_index, task, config)
    return -cost


# ----------------------------------------------------------- encoding

def plan_dimension(model: CharacterModel, config: Config) -> int:
    return config.n_spline_points * (model.n_joints + 1)


def default_plan(model: CharacterModel, config: Config) -> np.ndarray:
    """Parameter vector of the constant guard-pose spline."""
    return spline.encode(spline.constant_spline(
        model.reference_pose, config.horizon, config.n_spline_points))


def decode_plan(vector: np.ndarray, model: CharacterModel,
                config: Config) -> ControlSpline:
    return spline.decode(vector, model.joint_limits, config.horizon,
                         config.min_knot_spacing, config.n_spline_points)


def seed_std(model: CharacterModel, config: Config) -> np.ndarray:
    """Per-coordinate sampling spread for injected seeds: the pose
    tolerance on target coordinates, a tenth of the horizon on knot
    times."""
    row = np.full(model.n_joints + 1, config.pose_tolerance_rad)
    row[0] = 0.1 * config.horizon
    return np.tile(row, config.n_spline_points)


def make_seeds(last_best: Sequence[np.ndarray], model: CharacterModel,
               config: Config) -> list[Seed]:
    """Seed list for the first update of a frame.

    Retained best plans arrive already shifted into the current frame's
    time base. Unfilled retention slots fall back to extra guard-pose
    seeds so the seed count stays constant. The first seed of each group
    is exact so the retained plan and the plain guard hold are always
    themselves members of the population; the rest perturb those means
    to keep exploring.
    """
    std = seed_std(model, config)
    seeds: list[Seed] = []
    for i, v in enumerate(list(last_best)[: config.n_last_best]):
        s = 0.0 if i == 0 else std
        seeds.append(Seed(np.asarray(v, float), s, cmaes.ORIGIN_LAST_BEST))
    base = default_plan(model, config)
    first_default = True
    while len(seeds) < config.n_last_best + config.n_default_pose:
        s = 0.0 if first_default else std
        first_default = False
        seeds.append(Seed(base, s, cmaes.ORIGIN_DEFAULT_POSE))
    return seeds


def shift_plan(vector: np.ndarray, model: CharacterModel,
               config: Config) -> np.ndarray:
    """Re-base a plan one frame into the future."""
    sp = decode_plan(vector, model, config)
    return spline.encode(spline.shift(sp, config.dt, config.min_knot_spacing))


# ----------------------------------------------------------- rollouts

def rollout_fitness(model: CharacterModel, world: WorldState,
                    self_index: int, task: Task,
                    root_commands: Sequence[float], vector: np.ndarray,
                    config: Config,
                    opp_plan: Optional[ControlSpline] = None,
                    ws=None) -> float:
    """Mean state fitness of one candidate plan simulated forward.

    The opponent follows `opp_plan` up to the opponent horizon and holds
    it from there; without a plan it holds the guard pose. Root commands
    stay fixed for the whole horizon; the task ages and completes inside
    the rollout exactly as the match loop would evolve it.
    """
    sp = decode_plan(vector, model, config)
    mdl = model.packed
    if ws is None:
        ws = _dynamics.make_workspace(mdl.n_joints, mdl.disc_bone.shape[0])
    arrays = [np.ascontiguousarray(a) for a in _pack_world(world)]
    if opp_plan is None:
        opp_times = sp.times  # unused under the hold flag
        opp_targets = sp.target_matrix
        opp_hold = 1
    else:
        opp_times = opp_plan.times
        opp_targets = opp_plan.target_matrix
        opp_hold = 0
    mp = task.move_point if task.move_point is not None else (0.0, 0.0)
    return float(_dynamics.rollout(
        mdl, *arrays,
        self_index, int(task.kind), int(task.hand), int(task.target_area),
        float(mp[0]), float(mp[1]),
        task.age(world.clock), config.max_task_duration,
        config.move_tolerance, 4.0 * config.hand_relax_tolerance,
        sp.times, sp.target_matrix, opp_times, opp_targets, opp_hold,
        np.asarray(root_commands, float), config.dt, config.n_rollout_steps,
        config.opponent_horizon, config.gravity, config.n_substeps,
        config.contact_stiffness, config.contact_damping,
        config.punch_min_speed, config.root_min_gap,
        config.arena_half_width, config.pose_tolerance_rad,
        config.move_tolerance, config.hand_velocity_tolerance,
        config.hand_relax_tolerance, config.punch_speed_desired, ws))


# ------------------------------------------------------------ planner

@dataclass
class PlanResult:
    vector: np.ndarray
    plan: ControlSpline
    fitness: float
    targets: np.ndarray  # executed action: the plan one frame in
    origin: str
    update_bests: list[float] = field(default_factory=list)
    n_rollouts: int = 0


class Planner:
    """Per-character rolling-horizon optimizer.

    Owns the CMA-ES state, the retained best plans of recent frames and
    the RNG stream. Call :meth:`plan` once per control frame; the state
    resets itself whenever the task changes.
    """

    def __init__(self, model: CharacterModel, config: Config,
                 self_index: int, seed: Optional[int] = None):
        self.model = model
        self.config = config
        self.self_index = self_index
        self.rng = np.random.default_rng(seed)
        self._ws = _dynamics.make_workspace(
            model.packed.n_joints, model.packed.disc_bone.shape[0])
        self._dim = plan_dimension(model, config)
        self._last_best: list[np.ndarray] = []
        self._signature = None
        self._cma = None

    def reset(self):
        self._last_best.clear()
        self._signature = None
        self._cma = None

    def _fresh_cma(self):
        return cmaes.init_cma(self._dim,
                              default_plan(self.model, self.config),
                              self.config.pose_tolerance_rad,
                              self.config.n_population)

    def plan(self, world: WorldState, task: Task, root_command: float,
             opp_plan: Optional[ControlSpline] = None,
             opp_root_command: float = 0.0) -> PlanResult:
        cfg = self.config
        sig = task.signature()
        if self._cma is None or sig != self._signature:
            # new objective: restart the distribution, keep retained plans
            self._cma = self._fresh_cma()
            self._signature = sig

        cmds = np.empty(2)
        cmds[self.self_index] = root_command
        cmds[1 - self.self_index] = opp_root_command

        shifted = [shift_plan(v, self.model, cfg) for v in self._last_best]
        frame_seeds = make_seeds(shifted, self.model, cfg)
        std = seed_std(self.model, cfg)

        best_vec = None
        best_fit = -math.inf
        best_origin = cmaes.ORIGIN_CMA
        update_bests = []
        n_rollouts = 0
        for update in range(cfg.n_cma_updates):
            if update == 0:
                injected = frame_seeds
            elif best_vec is not None:
                injected = [Seed(best_vec, std, cmaes.ORIGIN_LAST_BEST)]
            else:
                injected = []  # every rollout so far diverged
            pop = cmaes.ask(self._cma, self.rng, injected)
            for cand in pop:
                cand.fitness = rollout_fitness(
                    self.model, world, self.self_index, task, cmds,
                    cand.vector, cfg, opp_plan, self._ws)
            n_rollouts += len(pop)
            top = cmaes.best_of(pop)
            if top.fitness > best_fit:
                best_vec = top.vector.copy()
                best_fit = float(top.fitness)
                best_origin = top.origin
            update_bests.append(best_fit)
            self._cma = cmaes.tell(self._cma, pop)

        if best_vec is None:
            # nothing evaluable this frame; hold the guard and report -inf
            best_vec = default_plan(self.model, cfg)
            best_origin = cmaes.ORIGIN_DEFAULT_POSE
        else:
            self._last_best.append(best_vec)
            if len(self._last_best) > cfg.n_last_best:
                self._last_best.pop(0)

        sp = decode_plan(best_vec, self.model, cfg)
        return PlanResult(
            vector=best_vec, plan=sp, fitness=best_fit,
            targets=spline.evaluate(sp, cfg.dt), origin=best_origin,
            update_bests=update_bests, n_rollouts=n_rollouts)

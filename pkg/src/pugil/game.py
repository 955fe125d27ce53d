"""Match orchestration: commands, the task state machine, scoring, HUD.

One :class:`Match` instance owns the world, both planners and the
per-player task state. :meth:`Match.tick` advances everything by one
control frame: pending commands are applied, stale tasks retired, both
characters plan against the opponent's last known spline, the first
actions execute, and landed punches turn into points. First player to
reach the winning score takes the match.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import sim, spline
from .config import Config
from .control import Planner, PlanResult, Task, TaskKind
from .sim import (
    CharacterModel,
    Hand,
    PunchEvent,
    PunchFlag,
    PunchStatus,
    SimulationDiverged,
    TargetArea,
    WorldState,
)


class MatchError(RuntimeError):
    pass


class CommandRejected(MatchError):
    """Command arrived for a match that is no longer running."""


class MatchAborted(MatchError):
    """The simulation diverged; carries the original diagnostic."""


class RootDirection(enum.Enum):
    FORWARD = "fwd"
    BACK = "back"
    STOP = "stop"


@dataclass(frozen=True)
class SetMove:
    """Steer one fist toward where the player dragged it."""

    hand: Hand
    drag: np.ndarray  # world-frame offset from the current hand position


@dataclass(frozen=True)
class SetPunch:
    hand: Hand
    area: TargetArea


@dataclass(frozen=True)
class RootMove:
    direction: RootDirection


Action = Union[SetMove, SetPunch, RootMove]


@dataclass(frozen=True)
class Command:
    player: int
    action: Action


@dataclass(frozen=True)
class GuideLine:
    player: int
    hand: Hand
    start: np.ndarray
    end: np.ndarray


@dataclass
class HudState:
    """Per-frame highlight state.

    `highlights` maps (character index, part) to a color, where part is
    one of "head", "chest", "fistL", "fistR". Red marks a part punched
    this frame, green the operand hand and target of an active punch
    task. Move tasks show as a guide line from hand to target.
    """

    highlights: dict = field(default_factory=dict)
    guide_lines: List[GuideLine] = field(default_factory=list)


@dataclass(frozen=True)
class TickResult:
    events: Tuple[PunchEvent, ...]
    hud: HudState
    plans: Tuple[PlanResult, PlanResult]


PHASE_RUNNING = "running"
PHASE_FINISHED = "finished"

_FIST_PART = {Hand.LEFT: "fistL", Hand.RIGHT: "fistR"}
_AREA_PART = {TargetArea.HEAD: "head", TargetArea.CHEST: "chest"}


def score_punch(event: PunchEvent) -> int:
    """Points for one landed punch, 1 to 10, linear in rated power."""
    scaled = 9.0 * (event.power - 1000.0) / 2000.0
    return 1 + int(math.floor(scaled + 0.5))


class Match:
    """A running first-to-`win_score` bout between two planned fighters."""

    def __init__(self, model: Optional[CharacterModel] = None,
                 config: Optional[Config] = None,
                 seed: Optional[int] = None):
        self.config = config or Config()
        self.model = model or sim.default_character(self.config)
        self.world: WorldState = sim.spawn_world(self.model, self.config)
        if isinstance(seed, np.random.SeedSequence):
            ss = seed
        else:
            ss = np.random.SeedSequence(seed)
        kids = ss.spawn(2)
        self.planners = [Planner(self.model, self.config, i, seed=kids[i])
                         for i in range(2)]
        self.tasks: List[Task] = [Task.null(), Task.null()]
        self.scores: List[int] = [0, 0]
        self.root_commands = np.zeros(2)
        self.last_plans: List[Optional[spline.ControlSpline]] = [None, None]
        self.last_events: Tuple[PunchEvent, ...] = ()
        self.frame_index = 0
        self.winner: Optional[int] = None
        # tasks retired having done their job vs ran out their clock
        self.task_stats = {"completed": 0, "expired": 0}
        self._punch_landed = [False, False]

    @property
    def phase(self) -> str:
        return PHASE_RUNNING if self.winner is None else PHASE_FINISHED

    # ------------------------------------------------------- commands

    def apply_command(self, cmd: Command) -> None:
        if self.phase != PHASE_RUNNING:
            raise CommandRejected("match is finished")
        if cmd.player not in (0, 1):
            raise MatchError(f"no player {cmd.player}")
        action = cmd.action
        if isinstance(action, SetMove):
            self._set_move(cmd.player, action)
        elif isinstance(action, SetPunch):
            self._set_punch(cmd.player, action)
        elif isinstance(action, RootMove):
            self._set_root(cmd.player, action)
        else:
            raise MatchError(f"unknown action {action!r}")

    def _reach_clamp(self, player: int, hand: Hand,
                     target: np.ndarray) -> np.ndarray:
        # keep the requested point inside the disc the arm can sweep
        st = self.world.characters[player]
        poses = {p.name: p for p in sim.forward_kinematics(self.model, st)}
        bone = "upperArmL" if hand == Hand.LEFT else "upperArmR"
        shoulder = poses[bone].anchor
        reach = self.model.arm_length
        offset = target - shoulder
        r = float(np.hypot(*offset))
        if r <= reach or r == 0.0:
            return target
        return shoulder + offset * (reach / r)

    def _set_move(self, player: int, action: SetMove) -> None:
        drag = np.asarray(action.drag, dtype=float)
        if drag.shape != (2,) or not np.all(np.isfinite(drag)):
            raise MatchError("drag vector must be a finite 2-vector")
        pos, _ = sim.hand_point(self.model, self.world.characters[player],
                                action.hand)
        target = self._reach_clamp(player, action.hand, pos + drag)
        self.tasks[player] = Task.move(action.hand, target,
                                       started_at=self.world.clock)
        self.world.punches[player] = PunchStatus()
        self._punch_landed[player] = False

    def _set_punch(self, player: int, action: SetPunch) -> None:
        self.tasks[player] = Task.punch(action.hand, action.area,
                                        started_at=self.world.clock)
        self.world.punches[player] = PunchStatus(
            True, action.hand, action.area, PunchFlag.NOT_HAPPENED)
        self._punch_landed[player] = False

    def _set_root(self, player: int, action: RootMove) -> None:
        speed = self.config.root_speed
        if action.direction == RootDirection.STOP:
            v = 0.0
        elif action.direction == RootDirection.FORWARD:
            v = self.world.characters[player].facing * speed
        else:
            v = -self.world.characters[player].facing * speed
        self.root_commands[player] = v

    # ---------------------------------------------------- task machine

    def _retire_task(self, player: int) -> None:
        self.tasks[player] = Task.null()
        self.world.punches[player] = PunchStatus()
        self._punch_landed[player] = False

    def _update_task(self, player: int) -> None:
        task = self.tasks[player]
        if task.kind == TaskKind.NULL:
            return
        if task.age(self.world.clock) > self.config.max_task_duration + 1e-12:
            # a punch that landed did its job even if the clock, not the
            # return to guard, ended the task
            landed = (task.kind == TaskKind.PUNCH
                      and self._punch_landed[player])
            self.task_stats["completed" if landed else "expired"] += 1
            self._retire_task(player)
            return
        st = self.world.characters[player]
        pos, _ = sim.hand_point(self.model, st, task.hand)
        if task.kind == TaskKind.MOVE:
            if np.hypot(*(pos - task.move_point)) <= self.config.move_tolerance:
                self.task_stats["completed"] += 1
                self._retire_task(player)
        else:
            flag = self.world.punches[player].flag
            if flag == PunchFlag.HAPPENED_BEFORE:
                local = np.array([st.facing * (pos[0] - st.root_x), pos[1]])
                relax = self.model.hand_relax_positions[int(task.hand)]
                if np.hypot(*(local - relax)) \
                        <= 4.0 * self.config.hand_relax_tolerance:
                    self.task_stats["completed"] += 1
                    self._retire_task(player)

    # ------------------------------------------------------------ tick

    def begin_frame(self, commands: Iterable[Command] = ()) -> None:
        """Apply queued commands and run the per-frame task updates."""
        if self.phase != PHASE_RUNNING:
            raise MatchError("match is finished")
        for cmd in commands:
            self.apply_command(cmd)
        for i in range(2):
            self._update_task(i)

    def shifted_plan(self, player: int) -> Optional[spline.ControlSpline]:
        """Player's last plan re-based one frame, None before the first."""
        known = self.last_plans[player]
        if known is None:
            return None
        return spline.shift(known, self.config.dt,
                            self.config.min_knot_spacing)

    def plan_character(self, player: int,
                       opp_plan: Optional[spline.ControlSpline]) -> PlanResult:
        return self.planners[player].plan(
            self.world, self.tasks[player], self.root_commands[player],
            opp_plan=opp_plan,
            opp_root_command=self.root_commands[1 - player])

    def advance(self, targets: np.ndarray,
                plans: Sequence[Optional[spline.ControlSpline]],
                ) -> Tuple[PunchEvent, ...]:
        """Step the world one frame with both characters' joint targets."""
        try:
            self.world, events = sim.step_world(
                self.model, self.world, targets, self.root_commands,
                self.config)
        except SimulationDiverged as exc:
            raise MatchAborted(
                f"simulation diverged at frame {self.frame_index}: {exc}"
            ) from exc

        for i in range(2):
            self.last_plans[i] = plans[i]
        self.last_events = tuple(events)
        for ev in events:
            self.scores[ev.attacker] += score_punch(ev)
            self._punch_landed[ev.attacker] = True
        for i in range(2):
            if self.scores[i] >= self.config.win_score and self.winner is None:
                self.winner = i
        self.frame_index += 1
        return tuple(events)

    def tick(self, commands: Iterable[Command] = ()) -> TickResult:
        self.begin_frame(commands)
        results = [self.plan_character(i, self.shifted_plan(1 - i))
                   for i in range(2)]
        targets = np.stack([r.targets for r in results])
        events = self.advance(targets, [r.plan for r in results])
        return TickResult(events, self._hud(events),
                          (results[0], results[1]))

    def hud(self) -> HudState:
        """Highlight state for the most recently advanced frame."""
        return self._hud(self.last_events)

    def _hud(self, events: Sequence[PunchEvent]) -> HudState:
        hud = HudState()
        for ev in events:
            hud.highlights[(1 - ev.attacker, _AREA_PART[ev.target])] = "red"
        for i, task in enumerate(self.tasks):
            if task.kind == TaskKind.PUNCH:
                key = (i, _FIST_PART[task.hand])
                if key not in hud.highlights:
                    hud.highlights[key] = "green"
                tkey = (1 - i, _AREA_PART[task.target_area])
                if tkey not in hud.highlights:
                    hud.highlights[tkey] = "green"
            elif task.kind == TaskKind.MOVE:
                pos, _ = sim.hand_point(self.model,
                                        self.world.characters[i], task.hand)
                hud.guide_lines.append(
                    GuideLine(i, task.hand, pos, task.move_point.copy()))
        return hud

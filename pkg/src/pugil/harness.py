"""Headless match running: bot matches, traces, replay, bench, ablation.

The trace format is line-delimited JSON. The first line is a header
carrying the config and seed, every following line is one frame record,
and every ``snapshot_every`` frames the record embeds the full world
plus its canonical hash. Replaying a trace re-runs the match from the
recorded commands and confirms those hashes, which pins down planner
determinism end to end.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from . import bots, proto, sim
from .config import Config, config_from_dict
from .control import Planner, Task
from .game import Match, score_punch
from .sim import Hand, PunchEvent, TargetArea

_HAND_STR = {Hand.LEFT: "left", Hand.RIGHT: "right"}
_AREA_STR = {TargetArea.HEAD: "head", TargetArea.CHEST: "chest"}

TRACE_VERSION = 1


@dataclass(frozen=True)
class MatchReport:
    winner: Optional[int]
    frames: int
    punches: int
    task_success_rate: Optional[float]
    scores: Tuple[int, int]
    trace_hash: Optional[str] = None

    def summary(self) -> str:
        who = "none" if self.winner is None else f"player {self.winner}"
        rate = ("n/a" if self.task_success_rate is None
                else f"{self.task_success_rate:.2f}")
        return (f"winner {who} after {self.frames} frames, "
                f"{self.punches} punches landed, score "
                f"{self.scores[0]}-{self.scores[1]}, "
                f"task success {rate}")


def _event_obj(ev: PunchEvent) -> dict:
    return {"attacker": ev.attacker, "hand": _HAND_STR[ev.hand],
            "target": _AREA_STR[ev.target],
            "relativeSpeed": float(ev.relative_speed),
            "power": float(ev.power), "score": score_punch(ev)}


def _resolve_bot(bot: Union[str, bots.Bot]) -> bots.Bot:
    return bots.make_bot(bot) if isinstance(bot, str) else bot


def run_match(config: Optional[Config] = None,
              bot_a: Union[str, bots.Bot] = "aggressor",
              bot_b: Union[str, bots.Bot] = "idle",
              seed: int = 0,
              frames: int = 1000,
              trace_path=None,
              snapshot_every: int = 30,
              model=None) -> MatchReport:
    """Run one bot-vs-bot match; optionally record a trace file."""
    config = (config or Config()).validate()
    if frames < 1:
        raise ValueError("need at least one frame")
    if snapshot_every < 1:
        raise ValueError("snapshot_every must be positive")
    pair = [_resolve_bot(bot_a), _resolve_bot(bot_b)]
    root = np.random.SeedSequence(seed)
    match_ss, rng_a, rng_b = root.spawn(3)
    match = Match(model, config, match_ss)
    rngs = [np.random.default_rng(rng_a), np.random.default_rng(rng_b)]

    lines = [json.dumps({"trace": TRACE_VERSION, "seed": seed,
                         "snapshotEvery": snapshot_every,
                         "config": config.to_dict()},
                        separators=(",", ":"))]
    punches = 0
    frame = 0
    while frame < frames and match.winner is None:
        commands = []
        for p in range(2):
            cmd = pair[p].decide(match, p, rngs[p])
            if cmd is not None:
                commands.append(cmd)
        result = match.tick(commands)
        punches += len(result.events)
        if trace_path is not None:
            record = {
                "frame": frame,
                "commands": [proto.command_to_obj(c) for c in commands],
                "tasks": [proto.task_to_obj(t) for t in match.tasks],
                "firstActions": [[float(v) for v in r.targets]
                                 for r in result.plans],
                "events": [_event_obj(ev) for ev in result.events],
                "scores": list(match.scores),
            }
            if frame % snapshot_every == 0:
                record["snapshot"] = proto.world_to_obj(match.world)
                record["hash"] = f"{proto.world_hash(match.world):016x}"
            lines.append(json.dumps(record, separators=(",", ":")))
        frame += 1

    trace_hash = None
    if trace_path is not None:
        text = "\n".join(lines) + "\n"
        with open(trace_path, "w") as fh:
            fh.write(text)
        trace_hash = f"{proto.fnv1a64(text.encode()):016x}"

    stats = match.task_stats
    issued = stats["completed"] + stats["expired"]
    rate = None if issued == 0 else stats["completed"] / issued
    return MatchReport(match.winner, frame, punches, rate,
                       (match.scores[0], match.scores[1]), trace_hash)


@dataclass(frozen=True)
class ReplayReport:
    ok: bool
    frames: int
    snapshots_checked: int
    mismatches: Tuple[int, ...]  # frame indices whose hash disagreed
    winner: Optional[int]
    scores: Tuple[int, int]

    def summary(self) -> str:
        verdict = "ok" if self.ok else "HASH MISMATCH"
        return (f"replay {verdict}: {self.frames} frames, "
                f"{self.snapshots_checked} snapshots checked"
                + ("" if self.ok else
                   f", bad frames {list(self.mismatches)}"))


def replay_trace(trace_path, model=None) -> ReplayReport:
    """Re-run a recorded match and confirm its snapshot hashes."""
    with open(trace_path) as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not lines:
        raise ValueError(f"{trace_path}: empty trace")
    header = json.loads(lines[0])
    if header.get("trace") != TRACE_VERSION:
        raise ValueError(f"{trace_path}: not a trace file")
    config = config_from_dict(header["config"], source=str(trace_path))
    match_ss, _, _ = np.random.SeedSequence(header["seed"]).spawn(3)
    match = Match(model, config, match_ss)

    checked = 0
    mismatches: List[int] = []
    frames = 0
    for line in lines[1:]:
        record = json.loads(line)
        commands = [proto.command_from_obj(obj)
                    for obj in record.get("commands", [])]
        match.tick(commands)
        frames += 1
        if "hash" in record:
            checked += 1
            if f"{proto.world_hash(match.world):016x}" != record["hash"]:
                mismatches.append(record["frame"])
    return ReplayReport(not mismatches, frames, checked,
                        tuple(mismatches), match.winner,
                        (match.scores[0], match.scores[1]))


def run_benchmark(config: Optional[Config] = None,
                  n_plans: int = 30, warmup: int = 3,
                  model=None, seed: int = 0) -> dict:
    """Wall-clock planning rate under the configured rollout budget."""
    config = (config or Config()).validate()
    if n_plans < 1:
        raise ValueError("need at least one timed plan")
    model = model or sim.default_character(config)
    # strike range, so rollouts pay full price for both characters
    world = sim.spawn_world(model, config.replace(spawn_gap=0.58))
    planner = Planner(model, config, 0,
                      seed=np.random.SeedSequence(seed))
    task = Task.punch(Hand.LEFT, TargetArea.CHEST)
    hold = np.tile(model.reference_pose, (2, 1))

    def one_plan():
        nonlocal world
        res = planner.plan(world, task, 0.0, opp_plan=None,
                           opp_root_command=0.0)
        targets = np.stack([res.targets, hold[1]])
        world, _ = sim.step_world(model, world, targets,
                                  np.zeros(2), config)

    for _ in range(warmup):
        one_plan()
    start = time.perf_counter()
    for _ in range(n_plans):
        one_plan()
    wall = time.perf_counter() - start

    rollouts = config.n_cma_updates * config.n_population
    steps = rollouts * config.n_rollout_steps
    plans_per_s = n_plans / wall
    return {
        "n_plans": n_plans,
        "wall_s": wall,
        "rollouts_per_plan": rollouts,
        "steps_per_plan": steps,
        "plans_per_s": plans_per_s,
        "rollout_steps_per_s": plans_per_s * steps,
    }


def format_benchmark(report: dict) -> str:
    return (f"budget {report['rollouts_per_plan']} rollouts x "
            f"{report['steps_per_plan'] // report['rollouts_per_plan']} "
            f"steps = {report['steps_per_plan']} world-steps per plan\n"
            f"{report['n_plans']} plans in {report['wall_s']:.2f} s: "
            f"{report['plans_per_s']:.1f} plans/s, "
            f"{report['rollout_steps_per_s']:.0f} rollout steps/s")


ABLATION_VARIANTS = (
    ("no-seeding", {"n_last_best": 0, "n_default_pose": 0}),
    ("last-best", {"n_default_pose": 0}),
    ("default-pose", {"n_last_best": 0}),
    ("both", {}),
)


def _random_move_task(model, world, rng) -> Task:
    hand = Hand(int(rng.integers(2)))
    pos, _ = sim.hand_point(model, world.characters[0], hand)
    angle = rng.uniform(0.0, 2.0 * np.pi)
    radius = rng.uniform(0.10, 0.25)
    point = pos + radius * np.array([np.cos(angle), np.sin(angle)])
    return Task.move(hand, point, started_at=world.clock)


def _ablation_battery(variant_cfg: Config, model, task_ss, planner_ss,
                      frames: int, retarget_every: int) -> float:
    """Mean frame-best fitness while chasing a drifting Move target."""
    world = sim.spawn_world(model, variant_cfg)
    rng = np.random.default_rng(task_ss)
    planner = Planner(model, variant_cfg, 0, seed=planner_ss)
    hold = model.reference_pose
    task = None
    values = []
    for f in range(frames):
        if f % retarget_every == 0:
            task = _random_move_task(model, world, rng)
        res = planner.plan(world, task, 0.0, opp_plan=None,
                           opp_root_command=0.0)
        values.append(res.fitness)
        targets = np.stack([res.targets, hold])
        world, _ = sim.step_world(model, world, targets,
                                  np.zeros(2), variant_cfg)
    return float(np.mean(values))


def run_ablation(config: Optional[Config] = None,
                 n_seeds: int = 20, frames: int = 32,
                 retarget_every: int = 8,
                 model=None, seed: int = 0) -> dict:
    """Mean best fitness per frame for each seeding variant.

    A trial chases a sequence of random Move targets, redrawn near the
    hand every few frames so each switch lands mid-motion: retained-plan
    seeds matter most right after a goal change, a steady distribution
    can coast the rest of the time, and the battery samples both.

    The per-trial RNG pair is spawned once per seed and reused by every
    variant. Spawning is stateful, so a per-variant respawn would hand
    each variant different streams and the comparison would stop being
    paired.
    """
    config = (config or Config()).validate()
    if n_seeds < 2:
        raise ValueError("need at least two seeds for a spread")
    if retarget_every < 1:
        raise ValueError("retarget_every must be at least 1")
    model = model or sim.default_character(config)
    pairs = [child.spawn(2)
             for child in np.random.SeedSequence(seed).spawn(n_seeds)]

    rows = []
    for name, overrides in ABLATION_VARIANTS:
        variant_cfg = config.replace(**overrides)
        per_seed = [
            _ablation_battery(variant_cfg, model, task_ss, planner_ss,
                              frames, retarget_every)
            for task_ss, planner_ss in pairs
        ]
        arr = np.asarray(per_seed)
        rows.append({
            "variant": name,
            "mean": float(arr.mean()),
            "stderr": float(arr.std(ddof=1) / np.sqrt(len(arr))),
            "perSeed": per_seed,
        })
    return {"rows": rows, "seeds": n_seeds, "frames": frames,
            "retargetEvery": retarget_every}


def format_ablation(result: dict) -> str:
    rows = result["rows"]
    by_name = {r["variant"]: r for r in rows}
    base = np.asarray(by_name["no-seeding"]["perSeed"])
    both = np.asarray(by_name["both"]["perSeed"])
    wins = float(np.mean(both >= base))
    width = max(len(r["variant"]) for r in rows)
    out = [f"seeding ablation over {result['seeds']} seeds, "
           f"{result['frames']} frames each, target redrawn every "
           f"{result['retargetEvery']} (higher is better)"]
    for r in rows:
        out.append(f"  {r['variant']:<{width}}  "
                   f"{r['mean']:+9.3f} +/- {r['stderr']:.3f}")
    out.append(f"  both >= no-seeding on {wins:.0%} of seeds")
    return "\n".join(out)

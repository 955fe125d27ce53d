"""Scripted players for headless matches.

Each bot inspects the match once per frame and emits at most one
command. They stand in for human strategies: walk in and swing, guard
the incoming fist, or mash buttons at random.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from . import sim
from .control import TaskKind
from .game import Command, Match, RootDirection, RootMove, SetMove, SetPunch
from .sim import Hand, TargetArea

# Root gap at which a chest punch lands reliably; past it, close in.
_STRIKE_GAP = 0.58


class Bot:
    kind = "?"

    def decide(self, match: Match, player: int,
               rng: np.random.Generator) -> Optional[Command]:
        raise NotImplementedError


class IdleBot(Bot):
    kind = "idle"

    def decide(self, match, player, rng):
        return None


def _area_centers(match: Match, player: int) -> dict:
    st = match.world.characters[player]
    names, pos, _, _ = sim.disc_snapshot(match.model, st)
    idx = {n: i for i, n in enumerate(names)}
    # the chest target is the torso disc
    return {TargetArea.HEAD: pos[idx["head"]].copy(),
            TargetArea.CHEST: pos[idx["torso"]].copy()}


class AggressorBot(Bot):
    """Closes distance, then keeps punching whatever is nearest."""

    kind = "aggressor"

    def decide(self, match, player, rng):
        if match.tasks[player].kind != TaskKind.NULL:
            return None
        a, b = (match.world.characters[player],
                match.world.characters[1 - player])
        gap = abs(a.root_x - b.root_x)
        if gap > _STRIKE_GAP:
            return Command(player, RootMove(RootDirection.FORWARD))
        if match.root_commands[player] != 0.0:
            return Command(player, RootMove(RootDirection.STOP))
        centers = _area_centers(match, 1 - player)
        best = None
        for hand in (Hand.LEFT, Hand.RIGHT):
            pos, _ = sim.hand_point(match.model, a, hand)
            for area, center in centers.items():
                d = float(np.hypot(*(pos - center)))
                if best is None or d < best[0]:
                    best = (d, hand, area)
        return Command(player, SetPunch(best[1], best[2]))


class BlockerBot(Bot):
    """Chases the opponent's punching fist with its own nearest hand."""

    kind = "blocker"

    def __init__(self):
        self._last_target: Optional[np.ndarray] = None

    def decide(self, match, player, rng):
        threat = match.world.punches[1 - player]
        if not threat.active:
            self._last_target = None
            return None
        opp = match.world.characters[1 - player]
        target, _ = sim.hand_point(match.model, opp, threat.hand)
        stale = (self._last_target is None
                 or float(np.hypot(*(target - self._last_target))) > 0.05)
        if match.tasks[player].kind == TaskKind.MOVE and not stale:
            return None
        self._last_target = target.copy()
        me = match.world.characters[player]
        hands = [(float(np.hypot(*(sim.hand_point(match.model, me, h)[0]
                                   - target))), h)
                 for h in (Hand.LEFT, Hand.RIGHT)]
        _, hand = min(hands)
        pos, _ = sim.hand_point(match.model, me, hand)
        return Command(player, SetMove(hand, target - pos))


class RandomBot(Bot):
    """Seeded button masher; roughly one command a second."""

    kind = "random"

    def decide(self, match, player, rng):
        if rng.random() > 1.0 / 20.0:
            return None
        roll = int(rng.integers(3))
        hand = Hand(int(rng.integers(2)))
        if roll == 0:
            drag = rng.uniform(-0.3, 0.3, size=2)
            return Command(player, SetMove(hand, drag))
        if roll == 1:
            return Command(player, SetPunch(
                hand, TargetArea(int(rng.integers(2)))))
        direction = list(RootDirection)[int(rng.integers(3))]
        return Command(player, RootMove(direction))


_KINDS = {cls.kind: cls for cls in (IdleBot, AggressorBot,
                                    BlockerBot, RandomBot)}

BOT_KINDS = tuple(sorted(_KINDS))


def make_bot(kind: str) -> Bot:
    try:
        return _KINDS[kind]()
    except KeyError:
        raise ValueError(
            f"unknown bot {kind!r}; pick one of {', '.join(BOT_KINDS)}"
        ) from None

"""Two-device play: framed binary messages and the lockstep sync loop.

Each endpoint plans only its own character and sends the result (first
action plus the whole spline) to the other side every frame. The server
steps the one true simulation with both actions and broadcasts the
post-step world; the client steps a local prediction and then overwrites
it wholesale with each incoming state, because separately run floating
point simulations drift apart no matter how careful the code is.

The wire format is length-prefixed frames: a little-endian u32 byte
count, one tag byte, then the payload with fields in a fixed order.
Integers are little-endian, reals are IEEE 754 doubles copied bit for
bit, so decode(encode(msg)) reproduces every value exactly. Anything a
buffer prefix cannot yet settle is reported as "need more bytes";
anything no continuation could repair raises :class:`ProtocolError`.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from . import spline
from .config import Config
from .control import Task, TaskKind
from .game import (
    PHASE_RUNNING,
    Command,
    Match,
    MatchError,
    RootDirection,
    RootMove,
    SetMove,
    SetPunch,
)
from .sim import (
    CharacterModel,
    CharacterState,
    Hand,
    PunchFlag,
    PunchStatus,
    TargetArea,
    WorldState,
)
from .spline import ControlSpline

PROTOCOL_VERSION = 1

ROLE_SERVER = 0
ROLE_CLIENT = 1

TAG_HELLO = 1
TAG_TASK_CMD = 2
TAG_ACTION = 3
TAG_STATE_SYNC = 4
TAG_BYE = 5

# Bye reasons.
BYE_NORMAL = 0
BYE_VERSION_MISMATCH = 1
BYE_PROTOCOL_ERROR = 2
BYE_ABORTED = 3

# Nothing this protocol sends comes anywhere near this; a length field
# above it can only be garbage, and rejecting early keeps a fuzzer from
# convincing us to wait for gigabytes.
MAX_FRAME_BYTES = 1 << 20

_ACTION_MOVE = 0
_ACTION_PUNCH = 1
_ACTION_ROOT = 2

_ROOT_DIR_CODE = {RootDirection.FORWARD: 0, RootDirection.BACK: 1,
                  RootDirection.STOP: 2}
_ROOT_DIR_FROM = {v: k for k, v in _ROOT_DIR_CODE.items()}


class ProtocolError(RuntimeError):
    """Bytes or message flow that no valid peer could have produced."""


class VersionMismatch(ProtocolError):
    """Handshake failed: the peer speaks a different protocol version."""


@dataclass(frozen=True)
class Hello:
    version: int
    role: int


@dataclass(frozen=True)
class TaskCmd:
    frame: int
    command: Command


@dataclass(frozen=True)
class ActionMsg:
    """One endpoint's planning result for one frame."""

    frame: int
    first_action: np.ndarray  # joint targets executed this frame
    best_spline: ControlSpline


@dataclass(frozen=True)
class StateSync:
    """The server's authoritative post-step snapshot."""

    frame: int
    world: WorldState
    scores: Tuple[int, int]
    tasks: Tuple[Task, Task]


@dataclass(frozen=True)
class Bye:
    reason: int


Message = Union[Hello, TaskCmd, ActionMsg, StateSync, Bye]


# ----------------------------------------------------------------- codec

class _Writer:
    __slots__ = ("_buf",)

    def __init__(self):
        self._buf = bytearray()

    def u8(self, v: int) -> None:
        self._buf.append(v & 0xFF)

    def i8(self, v: int) -> None:
        self._buf += struct.pack("<b", v)

    def u32(self, v: int) -> None:
        self._buf += struct.pack("<I", v)

    def f64(self, v: float) -> None:
        self._buf += struct.pack("<d", v)

    def f64s(self, values) -> None:
        arr = np.ascontiguousarray(values, dtype="<f8")
        self._buf += arr.tobytes()

    def bytes(self) -> bytes:
        return bytes(self._buf)


class _Reader:
    __slots__ = ("_view", "_pos")

    def __init__(self, payload: memoryview):
        self._view = payload
        self._pos = 0

    def _take(self, n: int) -> memoryview:
        if self._pos + n > len(self._view):
            raise ProtocolError("frame payload shorter than its fields")
        out = self._view[self._pos:self._pos + n]
        self._pos += n
        return out

    def u8(self) -> int:
        return self._take(1)[0]

    def i8(self) -> int:
        return struct.unpack("<b", self._take(1))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self._take(4))[0]

    def f64(self) -> float:
        return struct.unpack("<d", self._take(8))[0]

    def f64s(self, n: int) -> np.ndarray:
        if n < 0:
            raise ProtocolError("negative element count")
        raw = self._take(8 * n)
        return np.frombuffer(raw, dtype="<f8").astype(float)

    @property
    def exhausted(self) -> bool:
        return self._pos == len(self._view)


def _checked(reader: _Reader, value: int, allowed, what: str) -> int:
    if value not in allowed:
        raise ProtocolError(f"bad {what} {value}")
    return value


def _write_command(w: _Writer, cmd: Command) -> None:
    w.u8(cmd.player)
    action = cmd.action
    if isinstance(action, SetMove):
        w.u8(_ACTION_MOVE)
        w.u8(int(action.hand))
        w.f64s(np.asarray(action.drag, dtype=float))
    elif isinstance(action, SetPunch):
        w.u8(_ACTION_PUNCH)
        w.u8(int(action.hand))
        w.u8(int(action.area))
    elif isinstance(action, RootMove):
        w.u8(_ACTION_ROOT)
        w.u8(_ROOT_DIR_CODE[action.direction])
    else:
        raise ValueError(f"cannot encode action {action!r}")


def _read_command(r: _Reader) -> Command:
    player = _checked(r, r.u8(), (0, 1), "player")
    kind = r.u8()
    if kind == _ACTION_MOVE:
        hand = Hand(_checked(r, r.u8(), (0, 1), "hand"))
        drag = r.f64s(2)
        return Command(player, SetMove(hand, drag))
    if kind == _ACTION_PUNCH:
        hand = Hand(_checked(r, r.u8(), (0, 1), "hand"))
        area = TargetArea(_checked(r, r.u8(), (0, 1), "target area"))
        return Command(player, SetPunch(hand, area))
    if kind == _ACTION_ROOT:
        code = _checked(r, r.u8(), (0, 1, 2), "root direction")
        return Command(player, RootMove(_ROOT_DIR_FROM[code]))
    raise ProtocolError(f"bad action kind {kind}")


def _write_spline(w: _Writer, sp: ControlSpline) -> None:
    w.u8(sp.n_points)
    w.u8(sp.ndof)
    w.f64s(sp.times)
    w.f64s(sp.target_matrix)


def _read_spline(r: _Reader) -> ControlSpline:
    n_points = r.u8()
    ndof = r.u8()
    if n_points < 2 or ndof < 1:
        raise ProtocolError("degenerate spline dimensions")
    times = r.f64s(n_points)
    targets = r.f64s(n_points * ndof).reshape(n_points, ndof)
    return spline.spline_from_arrays(times, targets)


def _write_task(w: _Writer, task: Task) -> None:
    w.u8(int(task.kind))
    w.u8(int(task.hand))
    w.u8(int(task.target_area))
    if task.move_point is None:
        w.f64s(np.zeros(2))
    else:
        w.f64s(np.asarray(task.move_point, dtype=float))
    w.f64(task.started_at)


def _read_task(r: _Reader) -> Task:
    kind = TaskKind(_checked(r, r.u8(), (0, 1, 2), "task kind"))
    hand = Hand(_checked(r, r.u8(), (0, 1), "hand"))
    area = TargetArea(_checked(r, r.u8(), (0, 1), "target area"))
    point = r.f64s(2)
    started = r.f64()
    if kind == TaskKind.MOVE:
        return Task.move(hand, point, started_at=started)
    if kind == TaskKind.PUNCH:
        return Task.punch(hand, area, started_at=started)
    return Task.null()


def write_world(w: _Writer, world: WorldState) -> None:
    """Canonical world serialization; also the state-hash input."""
    w.f64(world.clock)
    w.u8(len(world.characters))
    for ch in world.characters:
        w.f64(ch.root_x)
        w.f64(ch.root_vx)
        w.i8(ch.facing)
        w.u8(len(ch.q))
        w.f64s(ch.q)
        w.f64s(ch.qdot)
    for ps in world.punches:
        w.u8(1 if ps.active else 0)
        w.u8(int(ps.hand))
        w.u8(int(ps.target))
        w.u8(int(ps.flag))


def _read_world(r: _Reader) -> WorldState:
    clock = r.f64()
    n_chars = r.u8()
    if n_chars != 2:
        raise ProtocolError(f"bad character count {n_chars}")
    characters = []
    for _ in range(n_chars):
        root_x = r.f64()
        root_vx = r.f64()
        facing = _checked(r, r.i8(), (1, -1), "facing")
        nj = r.u8()
        if nj < 1:
            raise ProtocolError("character with no joints")
        q = r.f64s(nj)
        qdot = r.f64s(nj)
        characters.append(CharacterState(root_x, root_vx, q, qdot, facing))
    punches = []
    for _ in range(n_chars):
        active = _checked(r, r.u8(), (0, 1), "punch active flag")
        hand = Hand(_checked(r, r.u8(), (0, 1), "hand"))
        target = TargetArea(_checked(r, r.u8(), (0, 1), "target area"))
        flag = PunchFlag(_checked(r, r.u8(), (0, 1, 2), "punch flag"))
        punches.append(PunchStatus(bool(active), hand, target, flag))
    return WorldState(characters, punches, clock)


def world_bytes(world: WorldState) -> bytes:
    w = _Writer()
    write_world(w, world)
    return w.bytes()


_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


def world_hash(world: WorldState) -> int:
    """64-bit digest of the canonical world bytes; a test instrument."""
    return fnv1a64(world_bytes(world))


def encode_message(msg: Message) -> bytes:
    w = _Writer()
    if isinstance(msg, Hello):
        w.u8(TAG_HELLO)
        w.u8(msg.version)
        w.u8(msg.role)
    elif isinstance(msg, TaskCmd):
        w.u8(TAG_TASK_CMD)
        w.u32(msg.frame)
        _write_command(w, msg.command)
    elif isinstance(msg, ActionMsg):
        w.u8(TAG_ACTION)
        w.u32(msg.frame)
        first = np.asarray(msg.first_action, dtype=float)
        w.u8(len(first))
        w.f64s(first)
        _write_spline(w, msg.best_spline)
    elif isinstance(msg, StateSync):
        w.u8(TAG_STATE_SYNC)
        w.u32(msg.frame)
        write_world(w, msg.world)
        w.u32(msg.scores[0])
        w.u32(msg.scores[1])
        for task in msg.tasks:
            _write_task(w, task)
    elif isinstance(msg, Bye):
        w.u8(TAG_BYE)
        w.u32(msg.reason)
    else:
        raise ValueError(f"cannot encode {msg!r}")
    payload = w.bytes()
    return struct.pack("<I", len(payload)) + payload


def decode_message(buffer) -> Optional[Tuple[Message, int]]:
    """Decode one frame from the head of ``buffer``.

    Returns ``(message, bytes_consumed)`` or None while the buffer holds
    only a prefix of a frame. Raises :class:`ProtocolError` for input no
    further bytes could turn into a valid frame.
    """
    view = memoryview(buffer)
    if len(view) < 4:
        return None
    (length,) = struct.unpack("<I", view[:4])
    if length < 1 or length > MAX_FRAME_BYTES:
        raise ProtocolError(f"unreasonable frame length {length}")
    if len(view) < 4 + length:
        return None
    tag = view[4]
    r = _Reader(view[5:4 + length])
    try:
        if tag == TAG_HELLO:
            msg: Message = Hello(r.u8(),
                                 _checked(r, r.u8(), (0, 1), "role"))
        elif tag == TAG_TASK_CMD:
            msg = TaskCmd(r.u32(), _read_command(r))
        elif tag == TAG_ACTION:
            frame = r.u32()
            nj = r.u8()
            if nj < 1:
                raise ProtocolError("action with no joints")
            first = r.f64s(nj)
            msg = ActionMsg(frame, first, _read_spline(r))
        elif tag == TAG_STATE_SYNC:
            frame = r.u32()
            world = _read_world(r)
            scores = (r.u32(), r.u32())
            tasks = (_read_task(r), _read_task(r))
            msg = StateSync(frame, world, scores, tasks)
        elif tag == TAG_BYE:
            msg = Bye(r.u32())
        else:
            raise ProtocolError(f"unknown tag {tag}")
    except ValueError as exc:  # enum or array construction gone sour
        raise ProtocolError(str(exc)) from exc
    if not r.exhausted:
        raise ProtocolError("trailing bytes inside frame")
    return msg, 4 + length


def decode_stream(buffer) -> Tuple[List[Message], int]:
    """Decode every complete frame at the head of ``buffer``.

    Returns the messages and the byte count consumed; callers keep the
    tail and retry once more bytes arrive.
    """
    messages: List[Message] = []
    pos = 0
    view = memoryview(buffer)
    while True:
        got = decode_message(view[pos:])
        if got is None:
            return messages, pos
        msg, used = got
        messages.append(msg)
        pos += used


# ------------------------------------------------------------- sessions

def _winner_from_scores(match: Match) -> Optional[int]:
    for i in range(2):
        if match.scores[i] >= match.config.win_score:
            return i
    return None


class _Session:
    """State common to both endpoints of a connection."""

    role = -1

    def __init__(self, model: Optional[CharacterModel] = None,
                 config: Optional[Config] = None,
                 seed: Optional[int] = None):
        self.match = Match(model, config, seed)
        self.player = -1
        self.closed = False
        self.bye_reason: Optional[int] = None
        self._hello_sent = False
        self._greeted = False
        self._peer_frame = -1  # highest frame number seen from the peer
        self._opp_spline: Optional[ControlSpline] = None
        self._opp_spline_frame = -1
        self._pending: List[Command] = []

    # Local input, applied on the next frame.
    def submit(self, command: Command) -> None:
        if command.player != self.player:
            raise MatchError(
                f"this endpoint controls player {self.player}")
        self._pending.append(command)

    def _hold_targets(self) -> np.ndarray:
        return self.match.model.reference_pose.copy()

    def _shifted_opp_plan(self) -> Optional[ControlSpline]:
        if self._opp_spline is None:
            return None
        elapsed = self.match.frame_index - self._opp_spline_frame
        if elapsed <= 0:
            return self._opp_spline
        cfg = self.match.config
        return spline.shift(self._opp_spline, elapsed * cfg.dt,
                            cfg.min_knot_spacing)

    def _fail(self, reason: int) -> List[Message]:
        self.closed = True
        self.bye_reason = reason
        return [Bye(reason)]

    def _check_frame_order(self, frame: int) -> None:
        if frame < self._peer_frame:
            raise ProtocolError(
                f"frame {frame} after frame {self._peer_frame}")
        self._peer_frame = frame

    def _ingest_one(self, msg: Message) -> None:
        if isinstance(msg, Hello):
            if msg.version != PROTOCOL_VERSION:
                raise VersionMismatch(
                    f"peer speaks version {msg.version}, "
                    f"we speak {PROTOCOL_VERSION}")
            if msg.role == self.role:
                raise ProtocolError("both endpoints claim the same role")
            self._greeted = True
        elif isinstance(msg, Bye):
            self.closed = True
            self.bye_reason = msg.reason
        else:
            self._check_frame_order(msg.frame)
            self._handle(msg)

    def _handle(self, msg: Message) -> None:
        raise NotImplementedError

    def frame(self, inbox: Sequence[Message] = ()) -> List[Message]:
        """Run one endpoint frame; returns the messages to transmit."""
        if self.closed:
            return []
        try:
            for msg in inbox:
                self._ingest_one(msg)
        except VersionMismatch:
            return self._fail(BYE_VERSION_MISMATCH)
        except ProtocolError:
            return self._fail(BYE_PROTOCOL_ERROR)
        if self.closed:
            return []

        out: List[Message] = []
        if not self._hello_sent:
            out.append(Hello(PROTOCOL_VERSION, self.role))
            self._hello_sent = True
        if not self._greeted:
            return out  # handshake still in flight; no frames yet
        try:
            out.extend(self._run_frame())
        except MatchError:
            out.extend(self._fail(BYE_ABORTED))
        return out

    def _run_frame(self) -> List[Message]:
        raise NotImplementedError


class ServerSession(_Session):
    """Authoritative endpoint: steps the one real world, controls player 0."""

    role = ROLE_SERVER

    def __init__(self, model=None, config=None, seed=None):
        super().__init__(model, config, seed)
        self.player = 0
        self.stall_count = 0
        self._client_action: Optional[ActionMsg] = None

    def _handle(self, msg: Message) -> None:
        if isinstance(msg, TaskCmd):
            if msg.command.player != 1:
                raise ProtocolError("client commanded the server's player")
            if self.match.phase == PHASE_RUNNING:
                self.match.apply_command(msg.command)
        elif isinstance(msg, ActionMsg):
            self._client_action = msg
        elif isinstance(msg, StateSync):
            raise ProtocolError("client sent a state sync")

    def _run_frame(self) -> List[Message]:
        m = self.match
        if m.phase != PHASE_RUNNING:
            return self._fail(BYE_NORMAL)
        fi = m.frame_index
        m.begin_frame(self._pending)
        self._pending.clear()

        plan = m.plan_character(0, self._shifted_opp_plan())

        act = self._client_action
        if act is not None and act.frame == fi \
                and len(act.first_action) == len(plan.targets):
            client_targets = act.first_action
            self._opp_spline = act.best_spline
            self._opp_spline_frame = fi
        else:
            # no usable action for this frame: the client holds its pose
            client_targets = self._hold_targets()
            self.stall_count += 1

        targets = np.stack([plan.targets, client_targets])
        m.advance(targets, [plan.plan, self._opp_spline])

        out: List[Message] = [
            ActionMsg(fi, plan.targets, plan.plan),
            StateSync(fi, m.world.copy(), (m.scores[0], m.scores[1]),
                      (m.tasks[0], m.tasks[1])),
        ]
        if m.phase != PHASE_RUNNING:
            out.extend(self._fail(BYE_NORMAL))
        return out


class ClientSession(_Session):
    """Predictive endpoint: controls player 1, resyncs from every snapshot."""

    role = ROLE_CLIENT

    def __init__(self, model=None, config=None, seed=None, on_sync=None):
        super().__init__(model, config, seed)
        self.player = 1
        self.sync_count = 0
        # called with the session right after each overwrite, while the
        # local world is exactly the synced one
        self.on_sync = on_sync

    def _handle(self, msg: Message) -> None:
        if isinstance(msg, ActionMsg):
            self._opp_spline = msg.best_spline
            self._opp_spline_frame = msg.frame
        elif isinstance(msg, StateSync):
            self._apply_sync(msg)
        elif isinstance(msg, TaskCmd):
            raise ProtocolError("server sent a task command")

    def _apply_sync(self, msg: StateSync) -> None:
        m = self.match
        m.world = msg.world.copy()
        m.scores = [msg.scores[0], msg.scores[1]]
        m.tasks = [msg.tasks[0], msg.tasks[1]]
        m.frame_index = msg.frame + 1
        m.winner = _winner_from_scores(m)
        self.sync_count += 1
        if self.on_sync is not None:
            self.on_sync(self)

    def _run_frame(self) -> List[Message]:
        m = self.match
        if m.phase != PHASE_RUNNING:
            return self._fail(BYE_NORMAL)
        fi = m.frame_index
        out: List[Message] = []
        for cmd in self._pending:
            out.append(TaskCmd(fi, cmd))
        m.begin_frame(self._pending)
        self._pending.clear()

        plan = m.plan_character(1, self._shifted_opp_plan())
        out.append(ActionMsg(fi, plan.targets, plan.plan))

        # Predicted frame: assume the server keeps following its last
        # spline. The next StateSync replaces all of this.
        opp = self._shifted_opp_plan()
        if opp is None:
            opp_targets = self._hold_targets()
        else:
            opp_targets = spline.evaluate(opp, m.config.dt)
        targets = np.stack([opp_targets, plan.targets])
        m.advance(targets, [self._opp_spline, plan.plan])
        return out


# ------------------------------------------------------- JSON bridge

# Browser clients get the same messages re-encoded as JSON text. Union
# members sit under their type name, enums become short strings, and
# reals use Python's repr, which is the shortest decimal that parses
# back to the same double.

_HAND_STR = {Hand.LEFT: "left", Hand.RIGHT: "right"}
_AREA_STR = {TargetArea.HEAD: "head", TargetArea.CHEST: "chest"}
_FLAG_STR = {PunchFlag.NOT_HAPPENED: "notHappened",
             PunchFlag.HAPPENED_NOW: "happenedNow",
             PunchFlag.HAPPENED_BEFORE: "happenedBefore"}
_ROLE_STR = {ROLE_SERVER: "server", ROLE_CLIENT: "client"}
_KIND_STR = {TaskKind.NULL: "null", TaskKind.MOVE: "move",
             TaskKind.PUNCH: "punch"}
_DIR_STR = {d: d.value for d in RootDirection}

_HAND_FROM = {v: k for k, v in _HAND_STR.items()}
_AREA_FROM = {v: k for k, v in _AREA_STR.items()}
_FLAG_FROM = {v: k for k, v in _FLAG_STR.items()}
_ROLE_FROM = {v: k for k, v in _ROLE_STR.items()}
_KIND_FROM = {v: k for k, v in _KIND_STR.items()}
_DIR_FROM = {d.value: d for d in RootDirection}


def _floats(values) -> list:
    return [float(v) for v in np.asarray(values, dtype=float).ravel()]


def _spline_obj(sp: ControlSpline) -> dict:
    return {"times": _floats(sp.times),
            "targets": [_floats(row) for row in sp.target_matrix]}


def _command_obj(cmd: Command) -> dict:
    obj: dict = {"player": cmd.player}
    action = cmd.action
    if isinstance(action, SetMove):
        obj["SetMove"] = {"hand": _HAND_STR[action.hand],
                          "drag": _floats(action.drag)}
    elif isinstance(action, SetPunch):
        obj["SetPunch"] = {"hand": _HAND_STR[action.hand],
                           "area": _AREA_STR[action.area]}
    elif isinstance(action, RootMove):
        obj["RootMove"] = {"direction": _DIR_STR[action.direction]}
    else:
        raise ValueError(f"cannot encode action {action!r}")
    return obj


def _task_obj(task: Task) -> dict:
    return {
        "kind": _KIND_STR[task.kind],
        "hand": _HAND_STR[task.hand],
        "area": _AREA_STR[task.target_area],
        "movePoint": None if task.move_point is None
        else _floats(task.move_point),
        "startedAt": float(task.started_at),
    }


def _world_obj(world: WorldState) -> dict:
    return {
        "clock": float(world.clock),
        "characters": [
            {"rootX": float(c.root_x), "rootVx": float(c.root_vx),
             "facing": int(c.facing), "q": _floats(c.q),
             "qdot": _floats(c.qdot)}
            for c in world.characters
        ],
        "punches": [
            {"active": bool(p.active), "hand": _HAND_STR[p.hand],
             "target": _AREA_STR[p.target], "flag": _FLAG_STR[p.flag]}
            for p in world.punches
        ],
    }


def message_to_json(msg: Message) -> str:
    if isinstance(msg, Hello):
        body = {"Hello": {"version": msg.version,
                          "role": _ROLE_STR[msg.role]}}
    elif isinstance(msg, TaskCmd):
        body = {"TaskCmd": {"frame": msg.frame,
                            "Command": _command_obj(msg.command)}}
    elif isinstance(msg, ActionMsg):
        body = {"ActionMsg": {"frame": msg.frame,
                              "firstAction": _floats(msg.first_action),
                              "bestSpline": _spline_obj(msg.best_spline)}}
    elif isinstance(msg, StateSync):
        body = {"StateSync": {"frame": msg.frame,
                              "WorldState": _world_obj(msg.world),
                              "scores": [int(msg.scores[0]),
                                         int(msg.scores[1])],
                              "tasks": [_task_obj(t) for t in msg.tasks]}}
    elif isinstance(msg, Bye):
        body = {"Bye": {"reason": msg.reason}}
    else:
        raise ValueError(f"cannot encode {msg!r}")
    return json.dumps(body, separators=(",", ":"))


def _req(obj: dict, key: str):
    try:
        return obj[key]
    except (KeyError, TypeError):
        raise ProtocolError(f"missing field {key!r}") from None


def _lookup(table: dict, key, what: str):
    try:
        return table[key]
    except (KeyError, TypeError):
        raise ProtocolError(f"bad {what} {key!r}") from None


def _command_from(obj: dict) -> Command:
    player = _req(obj, "player")
    if player not in (0, 1):
        raise ProtocolError(f"bad player {player!r}")
    if "SetMove" in obj:
        a = obj["SetMove"]
        action: object = SetMove(_lookup(_HAND_FROM, _req(a, "hand"), "hand"),
                                 np.asarray(_req(a, "drag"), dtype=float))
    elif "SetPunch" in obj:
        a = obj["SetPunch"]
        action = SetPunch(_lookup(_HAND_FROM, _req(a, "hand"), "hand"),
                          _lookup(_AREA_FROM, _req(a, "area"), "area"))
    elif "RootMove" in obj:
        a = obj["RootMove"]
        action = RootMove(_lookup(_DIR_FROM, _req(a, "direction"),
                                  "direction"))
    else:
        raise ProtocolError("command without an action")
    return Command(player, action)


def _world_from(obj: dict) -> WorldState:
    try:
        characters = [
            CharacterState(float(c["rootX"]), float(c["rootVx"]),
                           np.asarray(c["q"], dtype=float),
                           np.asarray(c["qdot"], dtype=float),
                           int(c["facing"]))
            for c in _req(obj, "characters")
        ]
        punches = [
            PunchStatus(bool(p["active"]),
                        _lookup(_HAND_FROM, p["hand"], "hand"),
                        _lookup(_AREA_FROM, p["target"], "target"),
                        _lookup(_FLAG_FROM, p["flag"], "flag"))
            for p in _req(obj, "punches")
        ]
        return WorldState(characters, punches, float(_req(obj, "clock")))
    except (KeyError, TypeError, ValueError) as exc:
        raise ProtocolError(f"bad world: {exc}") from exc


def _task_from(obj: dict) -> Task:
    kind = _lookup(_KIND_FROM, _req(obj, "kind"), "task kind")
    hand = _lookup(_HAND_FROM, _req(obj, "hand"), "hand")
    started = float(_req(obj, "startedAt"))
    if kind == TaskKind.MOVE:
        point = _req(obj, "movePoint")
        if point is None:
            raise ProtocolError("move task without a point")
        return Task.move(hand, np.asarray(point, dtype=float),
                         started_at=started)
    if kind == TaskKind.PUNCH:
        area = _lookup(_AREA_FROM, _req(obj, "area"), "area")
        return Task.punch(hand, area, started_at=started)
    return Task.null()


def message_from_json(text: str) -> Message:
    try:
        body = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"bad JSON: {exc}") from exc
    if not isinstance(body, dict) or len(body) != 1:
        raise ProtocolError("message must be a single-key object")
    (name, obj), = body.items()
    try:
        if name == "Hello":
            return Hello(int(_req(obj, "version")),
                         _lookup(_ROLE_FROM, _req(obj, "role"), "role"))
        if name == "TaskCmd":
            return TaskCmd(int(_req(obj, "frame")),
                           _command_from(_req(obj, "Command")))
        if name == "ActionMsg":
            sp = _req(obj, "bestSpline")
            times = np.asarray(_req(sp, "times"), dtype=float)
            targets = np.asarray(_req(sp, "targets"), dtype=float)
            if targets.ndim != 2 or len(times) != len(targets):
                raise ProtocolError("spline times and targets disagree")
            return ActionMsg(
                int(_req(obj, "frame")),
                np.asarray(_req(obj, "firstAction"), dtype=float),
                spline.spline_from_arrays(times, targets))
        if name == "StateSync":
            tasks = _req(obj, "tasks")
            if len(tasks) != 2:
                raise ProtocolError("need exactly two tasks")
            scores = _req(obj, "scores")
            return StateSync(int(_req(obj, "frame")),
                             _world_from(_req(obj, "WorldState")),
                             (int(scores[0]), int(scores[1])),
                             (_task_from(tasks[0]), _task_from(tasks[1])))
        if name == "Bye":
            return Bye(int(_req(obj, "reason")))
    except (TypeError, ValueError, IndexError) as exc:
        raise ProtocolError(f"bad {name}: {exc}") from exc
    raise ProtocolError(f"unknown message type {name!r}")


# Object-level codecs shared with the trace format.
command_to_obj = _command_obj
command_from_obj = _command_from
task_to_obj = _task_obj
world_to_obj = _world_obj
world_from_obj = _world_from

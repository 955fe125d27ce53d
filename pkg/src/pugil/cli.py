"""Command line front end.

Subcommands cover the headless workflows (match, replay, bench, ablate)
and the two networked roles (serve, join). A served match can expose a
browser bridge: the same protocol messages re-encoded as JSON text over
a websocket, plus a per-frame Hud message that the binary protocol does
not carry. All randomness inside one invocation flows from --seed.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys
import time
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import bots, harness, proto
from .config import Config, ConfigError, load_config
from .game import HudState, Match, PHASE_RUNNING, score_punch
from .proto import ClientSession, ServerSession

PLAYBACK_SPEEDS = (0.12, 0.16, 0.2, 1.0)
_READ_TIMEOUT_S = 30.0
_HAND_STR = proto._HAND_STR


# ------------------------------------------------------------- helpers

def _load_config(path: Optional[str]) -> Config:
    return load_config(path) if path else Config().validate()


def _hostport(text: str, default_host: str) -> Tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise argparse.ArgumentTypeError(
            f"{text!r} is not host:port")
    return (host or default_host, int(port))


def _narrate_events(match: Match) -> None:
    for ev in match.last_events:
        print(f"frame {match.frame_index - 1}: player {ev.attacker} "
              f"lands {_HAND_STR[ev.hand]} punch to "
              f"{proto._AREA_STR[ev.target]}, +{score_punch(ev)} "
              f"({match.scores[0]}-{match.scores[1]})")


def _final_line(match: Match) -> str:
    if match.winner is None:
        return (f"no winner after {match.frame_index} frames "
                f"({match.scores[0]}-{match.scores[1]})")
    return (f"player {match.winner} wins "
            f"{match.scores[0]}-{match.scores[1]} "
            f"after {match.frame_index} frames")


def hud_to_obj(hud: HudState, match: Match) -> dict:
    """Bridge-only JSON payload: highlight colors, guide lines, events."""
    return {
        "frame": match.frame_index - 1,
        "highlights": [
            {"character": c, "part": part, "color": color}
            for (c, part), color in sorted(hud.highlights.items())
        ],
        "guides": [
            {"player": g.player, "hand": _HAND_STR[g.hand],
             "start": [float(v) for v in g.start],
             "end": [float(v) for v in g.end]}
            for g in hud.guide_lines
        ],
        "events": [harness._event_obj(ev) for ev in match.last_events],
        "scores": [match.scores[0], match.scores[1]],
        "winner": match.winner,
    }


# ------------------------------------------------- headless subcommands

def cmd_match(args) -> int:
    config = _load_config(args.config)
    report = harness.run_match(
        config=config, bot_a=args.bot_a, bot_b=args.bot_b,
        seed=args.seed, frames=args.frames, trace_path=args.trace)
    print(report.summary())
    if args.trace:
        print(f"trace {args.trace} hash {report.trace_hash}")
    return 0


def cmd_replay(args) -> int:
    try:
        report = harness.replay_trace(args.trace)
    except (OSError, ValueError) as exc:
        print(f"cannot replay {args.trace}: {exc}", file=sys.stderr)
        return 2
    print(report.summary())
    return 0 if report.ok else 1


def cmd_bench(args) -> int:
    config = _load_config(args.config)
    report = harness.run_benchmark(config=config, n_plans=args.plans,
                                   seed=args.seed)
    print(harness.format_benchmark(report))
    return 0


def cmd_ablate(args) -> int:
    config = _load_config(args.config)
    result = harness.run_ablation(config=config, n_seeds=args.seeds,
                                  frames=args.frames, seed=args.seed)
    print(harness.format_ablation(result))
    return 0


# --------------------------------------------------- browser bridge

class Bridge:
    """Websocket fanout for one hosted match.

    The first connection steers the hosted player; later ones watch.
    Incoming text is parsed with the protocol's JSON codec, so the
    browser speaks exactly the wire vocabulary plus nothing else.
    """

    def __init__(self, player: int):
        self.player = player
        self.role = proto.ROLE_SERVER if player == 0 else proto.ROLE_CLIENT
        self._sockets: set = set()
        self._controller = None
        self._commands: List = []

    async def attach(self, ws) -> None:
        self._sockets.add(ws)
        if self._controller is None:
            self._controller = ws
        try:
            await ws.send(proto.message_to_json(
                proto.Hello(proto.PROTOCOL_VERSION, self.role)))
            async for text in ws:
                if ws is not self._controller:
                    continue
                try:
                    msg = proto.message_from_json(text)
                except proto.ProtocolError as exc:
                    print(f"bridge: dropped bad message: {exc}")
                    continue
                if isinstance(msg, proto.TaskCmd) \
                        and msg.command.player == self.player:
                    self._commands.append(msg.command)
        finally:
            self._sockets.discard(ws)
            if ws is self._controller:
                self._controller = None

    def drain_commands(self) -> List:
        out, self._commands = self._commands, []
        return out

    async def broadcast(self, *texts: str) -> None:
        dead = []
        for ws in self._sockets:
            try:
                for text in texts:
                    await ws.send(text)
            except Exception:
                dead.append(ws)
        for ws in dead:
            self._sockets.discard(ws)

    async def broadcast_frame(self, match: Match) -> None:
        sync = proto.StateSync(
            match.frame_index - 1, match.world.copy(),
            (match.scores[0], match.scores[1]),
            (match.tasks[0], match.tasks[1]))
        hud = {"Hud": hud_to_obj(match.hud(), match)}
        await self.broadcast(
            proto.message_to_json(sync),
            json.dumps(hud, separators=(",", ":")))

    async def broadcast_bye(self, reason: int = proto.BYE_NORMAL) -> None:
        await self.broadcast(proto.message_to_json(proto.Bye(reason)))


def _make_bridge_server(bridge: Bridge, host: str, port: int):
    import websockets

    return websockets.serve(bridge.attach, host, port)


# ----------------------------------------------------- network pumps

def _encode_all(messages: Sequence[proto.Message]) -> bytes:
    return b"".join(proto.encode_message(m) for m in messages)


class _PeerGone(Exception):
    pass


async def _read_more(reader, buf: bytes) -> bytes:
    data = await asyncio.wait_for(reader.read(65536), _READ_TIMEOUT_S)
    if not data:
        raise _PeerGone
    return buf + data


async def _pump(session, reader, writer, pace_s: float,
                max_frames: Optional[int],
                pre_frame=None, post_frame=None) -> None:
    """Drive one lockstep endpoint over a byte stream.

    Blocks until the peer's messages for the pending frame have
    arrived, so the stall path in the session only fires on timeouts,
    never on ordinary scheduling.
    """
    is_server = isinstance(session, ServerSession)
    greeted = False
    buf = b""
    out = session.frame([])  # our Hello
    writer.write(_encode_all(out))
    await writer.drain()

    def ready(batch: List[proto.Message]) -> bool:
        if any(isinstance(m, proto.Bye) for m in batch):
            return True
        fi = session.match.frame_index
        if is_server:
            return any(isinstance(m, proto.ActionMsg) and m.frame == fi
                       for m in batch)
        if not greeted:
            return any(isinstance(m, proto.Hello) for m in batch)
        return any(isinstance(m, proto.StateSync) and m.frame == fi - 1
                   for m in batch)

    frames = 0
    try:
        while not session.closed:
            batch: List[proto.Message] = []
            while not ready(batch):
                buf = await _read_more(reader, buf)
                msgs, used = proto.decode_stream(buf)
                buf = buf[used:]
                batch.extend(msgs)
            if any(isinstance(m, proto.Hello) for m in batch):
                greeted = True

            started = time.perf_counter()
            if pre_frame is not None:
                pre_frame(session)
            out = session.frame(batch)
            writer.write(_encode_all(out))
            await writer.drain()
            if post_frame is not None:
                await post_frame(session)
            if session.closed:
                break

            frames += 1
            if max_frames is not None and frames >= max_frames:
                writer.write(proto.encode_message(
                    proto.Bye(proto.BYE_NORMAL)))
                session.closed = True
                session.bye_reason = proto.BYE_NORMAL
                await writer.drain()
                break
            rest = pace_s - (time.perf_counter() - started)
            if rest > 0:
                await asyncio.sleep(rest)
    except _PeerGone:
        print("peer disconnected before the match ended")
    except asyncio.TimeoutError:
        print(f"no data from peer for {_READ_TIMEOUT_S:.0f}s, giving up")
        writer.write(_encode_all([proto.Bye(proto.BYE_ABORTED)]))
        await writer.drain()
    finally:
        writer.close()


def _bot_feeder(kind: str, player: int, rng: np.random.Generator):
    bot = bots.make_bot(kind)

    def feed(session) -> None:
        if session.match.phase != PHASE_RUNNING:
            return
        cmd = bot.decide(session.match, player, rng)
        if cmd is not None:
            session.submit(cmd)

    return feed


def _bridge_feeder(bridge: Bridge):
    def feed(session) -> None:
        if session.match.phase != PHASE_RUNNING:
            return
        for cmd in bridge.drain_commands():
            session.submit(cmd)

    return feed


# ------------------------------------------------------ serve + join

async def _serve_local(args, config: Config) -> int:
    """Hosted match with no remote peer: browser vs local bot."""
    seed_match, seed_bot = np.random.SeedSequence(args.seed).spawn(2)
    match = Match(None, config, seed_match)
    bot = bots.make_bot(args.bot)
    rng = np.random.default_rng(seed_bot)
    bridge = Bridge(player=0)
    pace = config.dt / args.playback_speed

    async with _make_bridge_server(bridge, *args.bridge):
        print(f"bridge on ws://{args.bridge[0]}:{args.bridge[1]}, "
              f"browser steers player 0, {args.bot} bot steers player 1, "
              f"playback {args.playback_speed}x")
        frames = 0
        while match.winner is None and frames < args.frames:
            started = time.perf_counter()
            commands = bridge.drain_commands()
            cmd = bot.decide(match, 1, rng)
            if cmd is not None:
                commands.append(cmd)
            match.tick(commands)
            _narrate_events(match)
            await bridge.broadcast_frame(match)
            frames += 1
            rest = pace - (time.perf_counter() - started)
            if rest > 0:
                await asyncio.sleep(rest)
        await bridge.broadcast_bye()
    print(_final_line(match))
    return 0


async def _serve_lockstep(args, config: Config) -> int:
    """Authoritative host: remote peer steers player 1 over TCP."""
    seed_sess, seed_bot = np.random.SeedSequence(args.seed).spawn(2)
    session = ServerSession(None, config, seed_sess)

    bridge = None
    post_frame = None
    if args.bridge is not None:
        bridge = Bridge(player=0)
        feed = _bridge_feeder(bridge)

        async def post_frame(sess):
            _narrate_events(sess.match)
            await bridge.broadcast_frame(sess.match)
    else:
        feed = _bot_feeder(args.bot, 0,
                           np.random.default_rng(seed_bot))

        async def post_frame(sess):
            _narrate_events(sess.match)

    done = asyncio.Event()

    async def on_connection(reader, writer):
        peer = writer.get_extra_info("peername")
        print(f"peer connected from {peer[0]}:{peer[1]}")
        await _pump(session, reader, writer,
                    config.dt / args.playback_speed, args.frames,
                    pre_frame=feed, post_frame=post_frame)
        done.set()

    server = await asyncio.start_server(on_connection, *args.listen)
    print(f"listening on {args.listen[0]}:{args.listen[1]}, "
          f"playback {args.playback_speed}x")
    try:
        if bridge is not None:
            async with _make_bridge_server(bridge, *args.bridge):
                print(f"bridge on ws://{args.bridge[0]}:{args.bridge[1]}, "
                      f"browser steers player 0")
                await done.wait()
        else:
            await done.wait()
    finally:
        server.close()
        await server.wait_closed()
        if bridge is not None:
            await bridge.broadcast_bye(session.bye_reason
                                       or proto.BYE_NORMAL)
    if session.stall_count:
        print(f"{session.stall_count} stalled frames")
    print(_final_line(session.match))
    return 0


async def _join(args, config: Config) -> int:
    seed_sess, seed_bot = np.random.SeedSequence(args.seed).spawn(2)
    session = ClientSession(None, config, seed_sess)

    bridge = None
    post_frame = None
    if args.bridge is not None:
        bridge = Bridge(player=1)
        feed = _bridge_feeder(bridge)

        async def post_frame(sess):
            await bridge.broadcast_frame(sess.match)
    else:
        feed = _bot_feeder(args.bot, 1,
                           np.random.default_rng(seed_bot))

    try:
        reader, writer = await asyncio.open_connection(*args.connect)
    except OSError as exc:
        print(f"cannot reach {args.connect[0]}:{args.connect[1]}: {exc}")
        return 1
    print(f"joined {args.connect[0]}:{args.connect[1]}, "
          f"playback {args.playback_speed}x")

    pump = _pump(session, reader, writer,
                 config.dt / args.playback_speed, None,
                 pre_frame=feed, post_frame=post_frame)
    if bridge is not None:
        async with _make_bridge_server(bridge, *args.bridge):
            print(f"bridge on ws://{args.bridge[0]}:{args.bridge[1]}, "
                  f"browser steers player 1")
            await pump
        await bridge.broadcast_bye(session.bye_reason
                                   or proto.BYE_NORMAL)
    else:
        await pump
    print(f"{session.sync_count} state syncs received")
    print(_final_line(session.match))
    return 0


def cmd_serve(args) -> int:
    if args.listen is None and args.bridge is None:
        print("serve needs --listen, --bridge, or both")
        return 2
    config = _load_config(args.config)
    if args.listen is None:
        return asyncio.run(_serve_local(args, config))
    return asyncio.run(_serve_lockstep(args, config))


def cmd_join(args) -> int:
    config = _load_config(args.config)
    return asyncio.run(_join(args, config))


# ------------------------------------------------------------ parser

def _add_config_seed(sp) -> None:
    sp.add_argument("--config", metavar="FILE",
                    help="YAML config; unknown keys are errors")
    sp.add_argument("--seed", type=int, default=0,
                    help="root seed for all randomness (default 0)")


def _add_playback(sp) -> None:
    sp.add_argument("--playback-speed", type=float, default=0.2,
                    choices=PLAYBACK_SPEEDS, metavar="X",
                    help="wall-clock pacing of the live match: "
                         f"one of {', '.join(str(s) for s in PLAYBACK_SPEEDS)}"
                         " (default 0.2)")


def _add_bridge(sp, who: str) -> None:
    sp.add_argument("--bridge", metavar="HOST:PORT",
                    type=lambda s: _hostport(s, "127.0.0.1"),
                    help=f"serve the browser UI here; it steers {who}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pugil",
        description="Sparring matches between planned planar fighters.")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("match", help="headless bot-vs-bot match")
    _add_config_seed(sp)
    sp.add_argument("--frames", type=int, default=1000,
                    help="frame cap (default 1000)")
    sp.add_argument("--trace", metavar="FILE",
                    help="record a replayable trace here")
    sp.add_argument("--bot-a", default="aggressor", choices=bots.BOT_KINDS,
                    help="player 0 policy (default aggressor)")
    sp.add_argument("--bot-b", default="idle", choices=bots.BOT_KINDS,
                    help="player 1 policy (default idle)")
    sp.set_defaults(func=cmd_match)

    sp = sub.add_parser("replay", help="re-run a trace, verify snapshots")
    sp.add_argument("trace", help="trace file from match --trace")
    sp.set_defaults(func=cmd_replay)

    sp = sub.add_parser("bench", help="planning throughput")
    _add_config_seed(sp)
    sp.add_argument("--plans", type=int, default=30,
                    help="timed plans (default 30)")
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("ablate", help="population seeding comparison")
    _add_config_seed(sp)
    sp.add_argument("--seeds", type=int, default=20,
                    help="paired trial count (default 20)")
    sp.add_argument("--frames", type=int, default=32,
                    help="battery length per trial (default 32)")
    sp.set_defaults(func=cmd_ablate)

    sp = sub.add_parser("serve", help="host a match (TCP peer, browser, "
                                      "or both)")
    _add_config_seed(sp)
    sp.add_argument("--listen", metavar="HOST:PORT",
                    type=lambda s: _hostport(s, "0.0.0.0"),
                    help="accept one joining peer here; it steers player 1")
    _add_bridge(sp, "player 0")
    sp.add_argument("--bot", default="aggressor", choices=bots.BOT_KINDS,
                    help="policy for player 0 without a bridge, or the "
                         "local player 1 sparring partner with only a "
                         "bridge (default aggressor)")
    sp.add_argument("--frames", type=int, default=100000,
                    help="frame cap (default 100000)")
    _add_playback(sp)
    sp.set_defaults(func=cmd_serve)

    sp = sub.add_parser("join", help="join a served match as player 1")
    _add_config_seed(sp)
    sp.add_argument("--connect", metavar="HOST:PORT", required=True,
                    type=lambda s: _hostport(s, "127.0.0.1"),
                    help="server address")
    _add_bridge(sp, "player 1")
    sp.add_argument("--bot", default="blocker", choices=bots.BOT_KINDS,
                    help="player 1 policy without a bridge "
                         "(default blocker)")
    _add_playback(sp)
    sp.set_defaults(func=cmd_join)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return 130


if __name__ == "__main__":
    sys.exit(main())

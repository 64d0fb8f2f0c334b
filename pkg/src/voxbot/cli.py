"""Command-line entry point: serve, agent, play, replay, gen-data,
dump-memory, validate."""
from __future__ import annotations

import argparse
import json
import logging
import signal
import sys
from pathlib import Path

from . import data_io
from .parser import Grammar, generate
from .world import BlockRegistry, make_flat_world

log = logging.getLogger("voxbot")


def _parse_bounds(text: str) -> tuple[int, int, int]:
    parts = [int(v) for v in text.replace("x", ",").split(",") if v.strip()]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("bounds must be X,Y,Z")
    return tuple(parts)


def _parse_addr(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    if not host:
        raise argparse.ArgumentTypeError("server must be HOST:PORT")
    return host, int(port)


def build_arg_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="voxbot", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the world server")
    serve.add_argument("--port", type=int, default=5600)
    serve.add_argument("--bounds", type=_parse_bounds, default=(256, 128, 256))
    serve.add_argument("--record", default=None, help="session record output path")
    serve.add_argument("--seed", type=int, default=0)
    serve.add_argument("--gateway-port", type=int, default=None)
    serve.add_argument("--ground", type=int, default=4, help="flat terrain height")
    serve.add_argument("--registry", default=None, help="block registry file")
    serve.add_argument("--tick-rate", type=float, default=20.0)
    serve.add_argument("--ui-dir", default=None, help="static files for the gateway")

    agent = sub.add_parser("agent", help="run the assistant agent")
    agent.add_argument("--server", type=_parse_addr, required=True)
    agent.add_argument("--name", default="bot")
    agent.add_argument("--grammar", default=None)
    agent.add_argument("--profanity", default=None)
    agent.add_argument("--dances", default=None)
    agent.add_argument("--registry", default=None)
    agent.add_argument("--memory-dump", default=None, help="write memory as JSON lines on exit")

    play = sub.add_parser("play", help="run a scripted client session")
    play.add_argument("--server", type=_parse_addr, required=True)
    play.add_argument("--name", default="player")
    play.add_argument("--agent-name", default="bot")
    play.add_argument("--timeout", type=float, default=15.0)
    play.add_argument("--transcript", default=None, help="transcript path (default stdout)")
    play.add_argument("script", help="script path, or - for stdin")

    rep = sub.add_parser("replay", help="rebuild a world from a session record")
    rep.add_argument("--record", required=True)
    rep.add_argument("--bounds", type=_parse_bounds, default=(256, 128, 256))
    rep.add_argument("--ground", type=int, default=4)
    rep.add_argument("--expect-hash", default=None, help="fail unless the final hash matches")

    gen = sub.add_parser("gen-data", help="generate (dialogue, dictionary) pairs")
    gen.add_argument("--grammar", default=None)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--out", required=True)
    gen.add_argument("--format", choices=("jsonl", "json"), default="jsonl")

    dump = sub.add_parser("dump-memory", help="print a memory dump written by the agent")
    dump.add_argument("path")
    dump.add_argument("--kind", default=None, help="filter rows by kind")

    val = sub.add_parser("validate", help="validate a dataset file")
    val.add_argument("type", choices=("parse-data", "house-log", "segmentation"))
    val.add_argument("path")
    return ap


def cmd_serve(args) -> int:
    from .server import ServerConfig, StartupError, WorldServer

    ui_dir = args.ui_dir
    if ui_dir is None:
        bundled = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        ui_dir = str(bundled) if bundled.is_dir() else None
    config = ServerConfig(
        port=args.port,
        bounds=args.bounds,
        ground_height=args.ground,
        seed=args.seed,
        record_path=args.record,
        gateway_port=args.gateway_port,
        registry_path=args.registry,
        tick_rate=args.tick_rate,
        ui_dir=ui_dir,
    )
    try:
        server = WorldServer(config)
    except StartupError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(f"serving on port {server.port}", file=sys.stderr)
    if server.gateway_port is not None:
        print(f"gateway on port {server.gateway_port}", file=sys.stderr)
    stop = {"flag": False}
    signal.signal(signal.SIGINT, lambda *_: stop.__setitem__("flag", True))
    signal.signal(signal.SIGTERM, lambda *_: stop.__setitem__("flag", True))
    try:
        server.run(stop_check=lambda: stop["flag"])
    finally:
        server.stop()
    return 0


def cmd_agent(args) -> int:
    from .agent import Agent, AgentConfig

    config = AgentConfig(
        name=args.name,
        grammar_path=args.grammar,
        profanity_path=args.profanity,
        dances_path=args.dances,
        registry_path=args.registry,
    )
    host, port = args.server
    try:
        agent = Agent.connect(host, port, config)
    except OSError as e:
        print(f"error: cannot reach server: {e}", file=sys.stderr)
        return 1
    stop = {"flag": False}
    signal.signal(signal.SIGINT, lambda *_: stop.__setitem__("flag", True))
    signal.signal(signal.SIGTERM, lambda *_: stop.__setitem__("flag", True))
    summary = agent.run(stop_check=lambda: stop["flag"])
    if args.memory_dump:
        with open(args.memory_dump, "w", encoding="utf-8") as fh:
            agent.memory.dump(fh)
    print(json.dumps(summary), file=sys.stderr)
    return 0


def cmd_play(args) -> int:
    from .play import PlaySession, ScriptError, parse_script

    text = sys.stdin.read() if args.script == "-" else Path(args.script).read_text("utf-8")
    try:
        script = parse_script(text)
    except ScriptError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    host, port = args.server
    try:
        session = PlaySession.connect(
            host, port, name=args.name, agent_name=args.agent_name, timeout=args.timeout
        )
    except OSError as e:
        print(f"error: cannot reach server: {e}", file=sys.stderr)
        return 1
    try:
        passed = session.run(script)
    finally:
        session.close()
    out = open(args.transcript, "w", encoding="utf-8") if args.transcript else sys.stdout
    try:
        for row in session.transcript:
            out.write(json.dumps(row) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    if not passed:
        print(f"{session.failures} assertion(s) failed", file=sys.stderr)
        return 1
    return 0


def cmd_replay(args) -> int:
    from .server import ReplayError, replay

    try:
        events = data_io.read_house_log(args.record)
    except (OSError, data_io.DataError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    world = make_flat_world(args.bounds, args.ground)
    try:
        replay(events, world)
    except ReplayError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    final = f"{world.world_hash():016x}"
    print(json.dumps({"hash": final, "non_air": world.non_air_count(), "events": len(events)}))
    if args.expect_hash and args.expect_hash.lower() != final:
        print(f"hash mismatch: expected {args.expect_hash}, got {final}", file=sys.stderr)
        return 1
    return 0


def cmd_gen_data(args) -> int:
    try:
        grammar = Grammar.load(args.grammar) if args.grammar else Grammar.default()
        pairs = generate(grammar, args.seed, args.n)
    except Exception as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    data_io.write_parse_dataset(args.out, pairs, jsonl=(args.format == "jsonl"))
    print(f"wrote {len(pairs)} pairs to {args.out}", file=sys.stderr)
    return 0


def cmd_dump_memory(args) -> int:
    try:
        with open(args.path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    row = json.loads(line)
                except json.JSONDecodeError as e:
                    print(f"error: line {lineno}: {e.msg}", file=sys.stderr)
                    return 1
                if args.kind is None or row.get("kind") == args.kind:
                    print(json.dumps(row))
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


def cmd_validate(args) -> int:
    try:
        if args.type == "parse-data":
            pairs = data_io.read_parse_dataset(args.path)
            problems = data_io.validate_parse_pairs(pairs)
            for index, issues in problems:
                for issue in issues:
                    print(f"pair {index}: {issue}", file=sys.stderr)
            if problems:
                return 1
            print(f"ok: {len(pairs)} pairs", file=sys.stderr)
        elif args.type == "house-log":
            events = data_io.read_house_log(args.path)
            print(f"ok: {len(events)} events", file=sys.stderr)
        else:
            houses = data_io.read_segmentation(args.path)
            print(f"ok: {len(houses)} houses", file=sys.stderr)
    except (OSError, data_io.DataError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


COMMANDS = {
    "serve": cmd_serve,
    "agent": cmd_agent,
    "play": cmd_play,
    "replay": cmd_replay,
    "gen-data": cmd_gen_data,
    "dump-memory": cmd_dump_memory,
    "validate": cmd_validate,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_arg_parser().parse_args(argv)
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())

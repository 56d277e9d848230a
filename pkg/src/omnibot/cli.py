"""Command-line entry point.

Subcommands:
    run       headless full-speed scenario run, writing trace/summary files
    serve     real-time control server on a TCP (and optional WebSocket) port
    validate  parse a scenario and report the first problem, if any
    replay    re-run a recorded trace and verify it reproduces byte-for-byte
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import protocol
from .engine import replay_check, run_headless, write_trace
from .scenario import ScenarioError, packaged_scenario_text, parse_scenario
from .server import RobotServer

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INVALID = 2


def _read_scenario_text(name_or_path: str) -> str:
    path = Path(name_or_path)
    if path.exists():
        return path.read_text(encoding="utf-8")
    # fall back to the shipped scenarios so `omnibot run avoid_demo` works
    try:
        return packaged_scenario_text(name_or_path)
    except FileNotFoundError:
        raise FileNotFoundError(
            f"no scenario file or packaged scenario named {name_or_path!r}"
        )


def cmd_run(args) -> int:
    text = _read_scenario_text(args.scenario)
    engine, summary = run_headless(text, frames_dir=args.frames)
    if args.trace:
        write_trace(args.trace, text, engine.command_log, engine.records)
    if args.summary:
        Path(args.summary).write_text(
            json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    print(
        f"{summary['reason']}: {summary['ticks']} ticks, "
        f"{summary['collisions']} collisions, "
        f"min clearance {summary['min_clearance_m']:.3f} m"
    )
    return EXIT_OK


def cmd_serve(args) -> int:
    text = _read_scenario_text(args.scenario)
    scenario = parse_scenario(text)
    server = RobotServer(
        scenario,
        text,
        bind=args.bind,
        ws_bind=args.ws_bind,
        throttle=args.throttle,
        once=args.once,
        trace_path=args.trace,
        summary_path=args.summary,
    )
    try:
        server.start()
        host, port = server.bound_address
        print(f"listening on {host}:{port}", flush=True)
        if server.ws_bound_address:
            wh, wp = server.ws_bound_address
            print(f"websocket gateway on {wh}:{wp}", flush=True)
        while not (server.once and server.finished.wait(timeout=0.1)):
            pass
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        text = _read_scenario_text(args.scenario)
        parse_scenario(text)
    except (ScenarioError, ValueError, FileNotFoundError) as e:
        print(f"invalid: {e}", file=sys.stderr)
        return EXIT_INVALID
    print("ok")
    return EXIT_OK


def cmd_replay(args) -> int:
    ok, detail = replay_check(args.trace)
    if args.check:
        print(("match: " if ok else "MISMATCH: ") + detail)
        return EXIT_OK if ok else EXIT_FAILURE
    print(detail)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="omnibot", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    runp = sub.add_parser("run", help="run a scenario headless at full speed")
    runp.add_argument("scenario", help="scenario file or packaged scenario name")
    runp.add_argument("--trace", help="write the trace CSV here")
    runp.add_argument("--summary", help="write the summary JSON here")
    runp.add_argument("--frames", help="dump camera frames (PGM) to this directory")
    runp.set_defaults(func=cmd_run)

    servep = sub.add_parser("serve", help="serve the robot over the wire protocol")
    servep.add_argument("scenario", help="scenario file or packaged scenario name")
    servep.add_argument(
        "--bind",
        default=os.environ.get(protocol.BIND_ENV_VAR, protocol.DEFAULT_BIND),
        help=f"host:port (default {protocol.DEFAULT_BIND}, env {protocol.BIND_ENV_VAR})",
    )
    servep.add_argument(
        "--ws-bind", default=None, help="host:port for the WebSocket gateway"
    )
    servep.add_argument(
        "--throttle",
        type=float,
        default=1.0,
        help="real-time factor (1.0 = real time, 0 = as fast as possible)",
    )
    servep.add_argument(
        "--once", action="store_true", help="exit when the scenario run completes"
    )
    servep.add_argument("--trace", help="write the trace CSV on shutdown")
    servep.add_argument("--summary", help="write the summary JSON on shutdown")
    servep.set_defaults(func=cmd_serve)

    valp = sub.add_parser("validate", help="check a scenario file")
    valp.add_argument("scenario")
    valp.set_defaults(func=cmd_validate)

    repp = sub.add_parser("replay", help="re-run a trace file")
    repp.add_argument("trace")
    repp.add_argument(
        "--check", action="store_true", help="exit nonzero unless byte-identical"
    )
    repp.set_defaults(func=cmd_replay)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, FileNotFoundError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID if isinstance(e, ScenarioError) else EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())

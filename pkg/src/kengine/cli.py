"""Command line interface.

Subcommands: serve (HTTP/WS service), repl (interactive chat with compact
traces), ask (one-shot question, scripting-friendly exit codes), validate
(load files and run the invariant suite), export-trace (fetch a turn's
trace from a running server and write the report bundle).

Flags fall back to the KE_KNOWLEDGE / KE_SCENE / KE_ADDR environment
variables, then to the packaged seed files.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import default_knowledge_path, default_scene_path
from .errors import EngineError, LoadError
from .kg import load_knowledge, save_knowledge
from .service import Engine, create_app
from .sim import load_scene, validate_scene

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_STARTUP = 2
EXIT_UNPARSEABLE = 3
EXIT_ENGINE = 4

DEFAULT_ADDR = "127.0.0.1:8420"


def _common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--knowledge", type=Path,
                        default=os.environ.get("KE_KNOWLEDGE"),
                        help="knowledge file (default: packaged seed)")
    parser.add_argument("--scene", type=Path,
                        default=os.environ.get("KE_SCENE"),
                        help="scene file (default: packaged lab fixture)")
    parser.add_argument("--addr", default=os.environ.get("KE_ADDR", DEFAULT_ADDR),
                        help="service address HOST:PORT")
    parser.add_argument("--tick-hz", type=float, default=20.0,
                        help="simulator ticks per second when serving")
    parser.add_argument("--log", default="WARNING", help="log level")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kengine")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the chat/trace service")
    _common_flags(serve)
    serve.add_argument("--ui", type=Path, default=None,
                       help="directory with built web UI assets")

    repl = sub.add_parser("repl", help="interactive chat with compact traces")
    _common_flags(repl)

    ask = sub.add_parser("ask", help="one-shot question")
    _common_flags(ask)
    ask.add_argument("question")
    ask.add_argument("--json", action="store_true", dest="as_json",
                     help="print the full trace as JSON")

    validate = sub.add_parser("validate", help="check knowledge/scene files")
    _common_flags(validate)

    export = sub.add_parser("export-trace",
                            help="fetch a turn's trace and write the report bundle")
    _common_flags(export)
    export.add_argument("turn", type=int)
    export.add_argument("--out", type=Path, default=None,
                        help="output directory (default: reports/turn_<id>)")

    return parser


def _paths(args) -> tuple[Path, Path]:
    knowledge = Path(args.knowledge) if args.knowledge else default_knowledge_path()
    scene = Path(args.scene) if args.scene else default_scene_path()
    return knowledge, scene


def _build_engine(args, synchronous: bool) -> tuple[Engine, Path]:
    knowledge_path, scene_path = _paths(args)
    graph, counts = load_knowledge(knowledge_path)
    scene = load_scene(scene_path, graph)
    logger.info("loaded %s concepts, %s instances",
                counts["concepts"], len(graph.instance_ids()))
    return Engine(graph, scene, synchronous=synchronous), knowledge_path


def _split_addr(addr: str) -> tuple[str, int]:
    host, _, port = addr.rpartition(":")
    return host or "127.0.0.1", int(port)


# ----------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------

def cmd_serve(args) -> int:
    import signal
    import threading

    import uvicorn

    try:
        engine, knowledge_path = _build_engine(args, synchronous=False)
    except LoadError as exc:
        print(f"error: {exc.message}", file=sys.stderr)
        return EXIT_STARTUP

    def save_on_shutdown():
        save_knowledge(engine.graph, knowledge_path)
        logger.info("knowledge saved to %s", knowledge_path)

    static = args.ui if args.ui else _default_ui_dir()
    app = create_app(engine, tick_hz=args.tick_hz, static_dir=static,
                     on_shutdown=save_on_shutdown)
    host, port = _split_addr(args.addr)
    config = uvicorn.Config(app, host=host, port=port,
                            log_level=args.log.lower())
    server = uvicorn.Server(config)
    # run the server off the main thread so SIGTERM/SIGINT stay ours and the
    # process can exit cleanly (code 0) after the shutdown save
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    while not server.started:
        if not thread.is_alive():
            print(f"error: could not serve on {args.addr}", file=sys.stderr)
            return EXIT_STARTUP
        thread.join(timeout=0.05)
    print(f"kengine: serving on http://{host}:{port}", flush=True)
    stop = threading.Event()
    for sig in (signal.SIGTERM, signal.SIGINT):
        signal.signal(sig, lambda *_: stop.set())
    while thread.is_alive() and not stop.is_set():
        stop.wait(0.2)
    server.should_exit = True
    thread.join(timeout=30)
    return EXIT_OK


def _default_ui_dir() -> Path | None:
    candidate = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    return candidate if candidate.is_dir() else None


def _print_turn(turn, engine) -> None:
    print(turn.reply)
    if turn.trace is not None:
        from .report import compact_trace_lines
        for line in compact_trace_lines(turn.trace.to_json()):
            print(line)


def cmd_repl(args) -> int:
    try:
        engine, _ = _build_engine(args, synchronous=True)
    except LoadError as exc:
        print(f"error: {exc.message}", file=sys.stderr)
        return EXIT_STARTUP
    session = engine.create_session()
    echo = not sys.stdin.isatty()
    print("kengine repl — ask a question or give a command; 'quit' leaves")
    while True:
        try:
            line = input("> ")
        except EOFError:
            print()
            break
        if echo:
            print(line)
        stripped = line.strip()
        if not stripped:
            continue
        if stripped in ("quit", "exit"):
            break
        turn = engine.post_chat(session.id, stripped)
        _print_turn(turn, engine)
    print("bye")
    return EXIT_OK


def cmd_ask(args) -> int:
    try:
        engine, _ = _build_engine(args, synchronous=True)
    except LoadError as exc:
        print(f"error: {exc.message}", file=sys.stderr)
        return EXIT_STARTUP
    session = engine.create_session()
    turn = engine.post_chat(session.id, args.question)
    if turn.kind == "error":
        print(turn.reply, file=sys.stderr)
        code = turn.payload.get("code")
        return EXIT_UNPARSEABLE if code == "PARSE_ERROR" else EXIT_ENGINE
    if args.as_json:
        if turn.trace is not None:
            print(json.dumps({"turn_id": turn.turn_id, **turn.trace.to_json()},
                             indent=2, sort_keys=True))
        else:
            print(json.dumps(turn.to_json(), indent=2, sort_keys=True))
    else:
        print(turn.reply)
    return EXIT_OK


def cmd_validate(args) -> int:
    knowledge_path, scene_path = _paths(args)
    problems: list[str] = []
    graph = None
    try:
        graph, counts = load_knowledge(knowledge_path)
        print(f"knowledge ok: {counts['concepts']} concepts, "
              f"{counts['edges']} edges ({knowledge_path})")
    except LoadError as exc:
        problems.append(exc.message)
    if graph is not None:
        try:
            scene = load_scene(scene_path, graph)
            print(f"scene ok: {len(scene.rooms)} rooms, "
                  f"{len(scene.objects)} objects ({scene_path})")
            problems.extend(validate_scene(scene))
            problems.extend(graph.validate())
        except LoadError as exc:
            problems.append(exc.message)
    for problem in problems:
        print(f"violation: {problem}", file=sys.stderr)
    return EXIT_INVALID if problems else EXIT_OK


def cmd_export_trace(args) -> int:
    import httpx

    from .report import export_trace_bundle

    base = args.addr if args.addr.startswith("http") else f"http://{args.addr}"
    try:
        trace_response = httpx.get(f"{base}/api/trace/{args.turn}", timeout=10)
        scene_response = httpx.get(f"{base}/api/scene", timeout=10)
    except httpx.HTTPError as exc:
        print(f"error: cannot reach {base}: {exc}", file=sys.stderr)
        return EXIT_ENGINE
    if trace_response.status_code != 200:
        print(f"error: {trace_response.text}", file=sys.stderr)
        return EXIT_ENGINE
    out = args.out or Path("reports") / f"turn_{args.turn}"
    written = export_trace_bundle(trace_response.json(), scene_response.json(), out)
    for path in written:
        print(path)
    return EXIT_OK


COMMANDS = {
    "serve": cmd_serve,
    "repl": cmd_repl,
    "ask": cmd_ask,
    "validate": cmd_validate,
    "export-trace": cmd_export_trace,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log.upper(), logging.WARNING))
    try:
        return COMMANDS[args.command](args)
    except EngineError as exc:
        print(f"error: {exc.message}", file=sys.stderr)
        return EXIT_ENGINE


if __name__ == "__main__":
    sys.exit(main())

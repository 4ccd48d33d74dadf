"""Command-line interface.

Exit status: 0 on success, 1 on validation errors (bad input, rejected
writes, unknown ids), 2 on internal errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path
from typing import Any, Sequence

from .adapters import AdapterSuite
from .config import GovernanceConfig, load_config
from .engine import Engine
from .errors import MemGovError, NotFound, ValidationError, WriteRejected
from .retrieval import QueryIntent
from .simulation import simulate_file

DEFAULT_STORE = "memgov.snapshot.jsonl"


def _emit(args: argparse.Namespace, payload: Any, text: str) -> None:
    if args.format == "structured":
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(text)


def _now(args: argparse.Namespace) -> float:
    return time.time() if args.at is None else args.at


def cmd_ingest(args: argparse.Namespace, engine: Engine) -> int:
    lines = [ln.strip() for ln in Path(args.file).read_text(encoding="utf-8").splitlines()]
    ids, rejected = [], []
    for n, line in enumerate(lines, start=1):
        if not line:
            continue
        try:
            ids.append(engine.ingest(line, _now(args), args.source))
        except WriteRejected as exc:
            rejected.append({"line": n, "reason": exc.reason})
    engine.save(args.store)
    _emit(args, {"ingested": ids, "rejected": rejected},
          "\n".join([f"INGEST {i}" for i in ids] + [f"REJECT line {r['line']}: {r['reason']}" for r in rejected]))
    return 1 if rejected else 0


def cmd_query(args: argparse.Namespace, engine: Engine) -> int:
    intent = QueryIntent(args.intent) if args.intent else None
    bundle = engine.query(args.text, _now(args), intent)
    engine.save(args.store)
    lines = [f"intent {bundle.intent.value}; budget {bundle.budget.mode} "
             f"(reserve {bundle.budget.generation_reserve}, allowance {bundle.budget.context_allowance})"]
    lines += [f"{a.memory_id}\t{a.score:.4f}\t{a.via}\t{a.content}" for a in bundle.admitted]
    _emit(args, bundle.to_dict(), "\n".join(lines))
    return 0


def cmd_feedback(args: argparse.Namespace, engine: Engine) -> int:
    answer = Path(args.answer_file).read_text(encoding="utf-8")
    report = engine.feedback(answer, _now(args))
    engine.save(args.store)
    lines = [f"{'USED' if e.used else 'UNUSED'} {e.memory_id} U {e.trust_before:.4f}->{e.trust_after:.4f} "
             f"S {e.stability_before:.4f}->{e.stability_after:.4f}" for e in report.entries]
    _emit(args, report.to_dict(), "\n".join(lines) or "no memories to reflect on")
    return 0


def cmd_gc(args: argparse.Namespace, engine: Engine) -> int:
    report = engine.maintain(_now(args))
    engine.save(args.store)
    _emit(args, report.to_dict(), "\n".join(report.audit_lines()))
    return 0


def cmd_forget(args: argparse.Namespace, engine: Engine) -> int:
    purged = engine.forget(args.id)
    engine.save(args.store)
    _emit(args, {"purged": purged}, "\n".join(f"PURGE {i}" for i in purged))
    return 0


def cmd_simulate(args: argparse.Namespace, config: GovernanceConfig) -> int:
    report = simulate_file(args.trace, config)
    rendered = report.render()
    if args.report:
        Path(args.report).write_text(rendered, encoding="utf-8")
    if args.format == "structured":
        sys.stdout.write(rendered)
    else:
        print(f"queries_satisfied={report.queries_satisfied}/{report.queries_checked} "
              f"pruned={report.memories_pruned} consolidated={report.memories_consolidated} "
              f"forgotten={report.memories_forgotten} final_store_size={report.final_store_size}")
    return 0


def cmd_config_check(args: argparse.Namespace, config: GovernanceConfig) -> int:
    _emit(args, {"fingerprint": config.fingerprint(), "keys": len(config.keys())},
          f"config ok, fingerprint {config.fingerprint()}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="memgov", description="Governed memory for long-lived agents.")
    parser.add_argument("--store", default=DEFAULT_STORE, help="snapshot file (created if missing)")
    parser.add_argument("--config", default=None, help="flat JSON config file")
    parser.add_argument("--format", choices=("text", "structured"), default="text")
    parser.add_argument("--at", type=float, default=None, help="override the clock (seconds since epoch)")
    parser.add_argument("--adapter-endpoint", default=os.environ.get("MEMGOV_ADAPTER_ENDPOINT"),
                        help="model adapter service URL (mock adapters when unset)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="store each non-empty line of a file as a memory")
    p.add_argument("file")
    p.add_argument("--source", choices=("user", "agent", "external"), default="user")

    p = sub.add_parser("query", help="run the retrieval auction")
    p.add_argument("text")
    p.add_argument("--intent", choices=[i.value for i in QueryIntent])

    p = sub.add_parser("feedback", help="reflect on an answer against the last query")
    p.add_argument("answer_file")

    sub.add_parser("gc", help="run a maintenance pass")

    p = sub.add_parser("forget", help="purge a memory and everything derived from it")
    p.add_argument("id", type=int)

    p = sub.add_parser("simulate", help="replay a trace file")
    p.add_argument("trace")
    p.add_argument("--report", help="also write the report to this path")

    p = sub.add_parser("serve", help="run the HTTP API")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8321)

    p = sub.add_parser("config", help="configuration tools")
    p.add_argument("action", choices=("check",))
    p.add_argument("path", nargs="?", help="config to check (defaults to --config)")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "config":
            return cmd_config_check(args, load_config(args.path or args.config))
        config = load_config(args.config)
        if args.command == "simulate":
            return cmd_simulate(args, config)
        engine = Engine.open(args.store, config, AdapterSuite.from_config(config, args.adapter_endpoint))
        if args.command == "serve":
            from .service import serve

            serve(engine, args.store, args.host, args.port)
            return 0
        handler = {
            "ingest": cmd_ingest,
            "query": cmd_query,
            "feedback": cmd_feedback,
            "gc": cmd_gc,
            "forget": cmd_forget,
        }[args.command]
        return handler(args, engine)
    except (ValidationError, NotFound, WriteRejected) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except MemGovError as exc:
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {exc!r}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

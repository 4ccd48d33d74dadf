"""Deterministic trace replay against a fresh engine with a virtual clock.

Trace grammar (format version 1), one JSON object per line; blank lines and
lines starting with ``#`` are ignored::

    trace   := header event*
    header  := {"trace": "memgov", "version": 1}
    event   := ingest | query | feedback | advance | maintain | forget
    ingest  := {"event": "ingest", "content": str, "source"?: "user"|"agent"|"external",
                "label"?: str, "at"?: days}
    query   := {"event": "query", "text": str, "expect_contains"?: [str],
                "intent"?: "fact"|"temporal"|"reasoning"|"multihop", "at"?: days}
    feedback:= {"event": "feedback", "answer": str, "at"?: days}
    advance := {"event": "advance", "days": number >= 0}
    maintain:= {"event": "maintain", "at"?: days}
    forget  := {"event": "forget", "memory_ref": label | id, "at"?: days}

``at`` is measured in days since the start of the trace and must never move
the clock backwards. Feedback applies to the memories admitted by the most
recent query.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .config import GovernanceConfig
from .engine import Engine
from .errors import NonMonotoneClock, ParseError, ValidationError, WriteRejected
from .model import SECONDS_PER_DAY, Source
from .retrieval import QueryIntent

TRACE_FORMAT = "memgov"
TRACE_VERSION = 1

_FIELDS: dict[str, tuple[set[str], set[str]]] = {
    # event -> (required, optional)
    "ingest": ({"content"}, {"source", "label", "at"}),
    "query": ({"text"}, {"expect_contains", "intent", "at"}),
    "feedback": ({"answer"}, {"at"}),
    "advance": ({"days"}, set()),
    "maintain": (set(), {"at"}),
    "forget": ({"memory_ref"}, {"at"}),
}


@dataclass
class TraceEvent:
    kind: str
    line: int
    data: dict[str, Any]


def parse_trace(text: str) -> list[TraceEvent]:
    events: list[TraceEvent] = []
    header_seen = False
    for n, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        try:
            obj = json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise ParseError(n, f"invalid JSON: {exc.msg}") from exc
        if not isinstance(obj, dict):
            raise ParseError(n, "expected an object")
        if not header_seen:
            if obj.get("trace") != TRACE_FORMAT or obj.get("version") != TRACE_VERSION:
                raise ParseError(n, f"expected header {{\"trace\": \"{TRACE_FORMAT}\", \"version\": {TRACE_VERSION}}}")
            header_seen = True
            continue
        kind = obj.pop("event", None)
        if kind not in _FIELDS:
            raise ParseError(n, f"unknown event {kind!r}")
        required, optional = _FIELDS[kind]
        missing = required - obj.keys()
        extra = obj.keys() - required - optional
        if missing:
            raise ParseError(n, f"{kind} lacks {sorted(missing)}")
        if extra:
            raise ParseError(n, f"{kind} has unknown fields {sorted(extra)}")
        _check_types(n, kind, obj)
        events.append(TraceEvent(kind, n, obj))
    if not header_seen and events:
        raise ParseError(1, "missing header")
    return events


def _check_types(n: int, kind: str, obj: dict[str, Any]) -> None:
    def number(key: str) -> None:
        value = obj.get(key)
        if key in obj and (isinstance(value, bool) or not isinstance(value, (int, float)) or value < 0):
            raise ParseError(n, f"{key} must be a non-negative number")

    def string(key: str) -> None:
        if key in obj and not isinstance(obj[key], str):
            raise ParseError(n, f"{key} must be a string")

    number("at")
    number("days")
    for key in ("content", "text", "answer", "label"):
        string(key)
    if "source" in obj and obj["source"] not in {s.value for s in Source}:
        raise ParseError(n, f"unknown source {obj['source']!r}")
    if "intent" in obj and obj["intent"] not in {i.value for i in QueryIntent}:
        raise ParseError(n, f"unknown intent {obj['intent']!r}")
    expect = obj.get("expect_contains")
    if expect is not None and (not isinstance(expect, list) or not all(isinstance(e, str) for e in expect)):
        raise ParseError(n, "expect_contains must be a list of strings")
    ref = obj.get("memory_ref")
    if kind == "forget" and (isinstance(ref, bool) or not isinstance(ref, (int, str))):
        raise ParseError(n, "memory_ref must be a label or an id")


@dataclass
class SimulationReport:
    queries_total: int = 0
    queries_checked: int = 0
    queries_satisfied: int = 0
    memories_ingested: int = 0
    writes_rejected: int = 0
    memories_pruned: int = 0
    memories_consolidated: int = 0
    memories_forgotten: int = 0
    final_store_size: int = 0
    counters: dict[str, int] = field(default_factory=lambda: {
        "gate_drops": 0,
        "hebbian_pulls": 0,
        "budget_reasoning": 0,
        "budget_recall": 0,
        "feedback_used": 0,
        "feedback_unused": 0,
        "maintenance_triggered": 0,
    })
    queries: list[dict[str, Any]] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "queries_total": self.queries_total,
            "queries_checked": self.queries_checked,
            "queries_satisfied": self.queries_satisfied,
            "memories_ingested": self.memories_ingested,
            "writes_rejected": self.writes_rejected,
            "memories_pruned": self.memories_pruned,
            "memories_consolidated": self.memories_consolidated,
            "memories_forgotten": self.memories_forgotten,
            "final_store_size": self.final_store_size,
            "counters": dict(self.counters),
            "queries": self.queries,
        }

    def render(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def run_simulation(events: list[TraceEvent], config: GovernanceConfig | None = None,
                   engine: Engine | None = None) -> SimulationReport:
    engine = engine or Engine(config)
    report = SimulationReport()
    clock = 0.0  # days
    labels: dict[str, int] = {}

    def tick(event: TraceEvent) -> float:
        nonlocal clock
        at = event.data.get("at")
        if at is not None:
            if at < clock:
                raise NonMonotoneClock(event.line, at, clock)
            clock = float(at)
        return clock * SECONDS_PER_DAY

    for event in events:
        d = event.data
        if event.kind == "advance":
            clock += float(d["days"])
        elif event.kind == "ingest":
            now = tick(event)
            try:
                memory_id = engine.ingest(d["content"], now, d.get("source", "user"))
            except WriteRejected:
                report.writes_rejected += 1
                continue
            report.memories_ingested += 1
            if "label" in d:
                labels[d["label"]] = memory_id
        elif event.kind == "query":
            now = tick(event)
            intent = QueryIntent(d["intent"]) if "intent" in d else None
            bundle = engine.query(d["text"], now, intent)
            report.queries_total += 1
            report.counters["gate_drops"] += bundle.gate_drops
            report.counters["hebbian_pulls"] += bundle.hebbian_pulls
            report.counters[f"budget_{bundle.budget.mode}"] += 1
            entry: dict[str, Any] = {"line": event.line, "intent": bundle.intent.value, "admitted": bundle.ids}
            expect = d.get("expect_contains")
            if expect is not None:
                report.queries_checked += 1
                contents = [a.content for a in bundle.admitted]
                satisfied = all(any(e in c for c in contents) for e in expect)
                report.queries_satisfied += satisfied
                entry["satisfied"] = satisfied
            report.queries.append(entry)
        elif event.kind == "feedback":
            now = tick(event)
            result = engine.feedback(d["answer"], now)
            report.counters["feedback_used"] += len(result.used)
            report.counters["feedback_unused"] += len(result.unused)
        elif event.kind == "maintain":
            now = tick(event)
            result = engine.maintain(now)
            report.counters["maintenance_triggered"] += result.triggered
            report.memories_pruned += len(result.deleted)
            report.memories_consolidated += len(result.consolidated_sources)
        elif event.kind == "forget":
            tick(event)
            ref = d["memory_ref"]
            if isinstance(ref, str):
                if ref not in labels:
                    raise ParseError(event.line, f"unknown memory label {ref!r}")
                ref = labels[ref]
            report.memories_forgotten += len(engine.forget(ref))
    report.final_store_size = len(engine.store)
    return report


def simulate_file(path: str | Path, config: GovernanceConfig | None = None) -> SimulationReport:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read trace {path}: {exc}") from exc
    return run_simulation(parse_trace(text), config)

"""Line-delimited JSON snapshots of a store.

Layout (format version 1), one JSON object per line::

    {"format": "memgov-snapshot", "version": 1, "embedding_dim": ..., "fingerprint": ..., "next_id": ...}
    {"type": "record", ...}          one per held record, ascending id
    {"type": "removed", "ids": [...]}
    {"type": "session", "last_retrieved": [...]}
    {"type": "count", "id": ..., "n": ...}        ascending id
    {"type": "pair", "a": ..., "b": ..., "n": ...} ascending (a, b)
    {"type": "end", "lines": ...}

The trailer lets a load detect truncation at a line boundary.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any, Iterator

import numpy as np

from .adapters import Embedder
from .config import GovernanceConfig
from .errors import ConfigMismatch, CorruptRecord, IoFailure
from .model import FsrsState, MemoryKind, MemoryRecord, Source, SourceTag, UtilityState
from .store import MemoryStore

FORMAT = "memgov-snapshot"
VERSION = 1


def _dumps(obj: dict[str, Any]) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"), allow_nan=False)


def _record_to_dict(r: MemoryRecord) -> dict[str, Any]:
    return {
        "type": "record",
        "id": r.id,
        "content": r.content,
        "kind": r.kind.value,
        "created_at": r.created_at,
        "stability": r.fsrs.stability,
        "difficulty": r.fsrs.difficulty,
        "last_review": r.fsrs.last_review,
        "trust": r.utility.trust,
        "covariance": r.utility.covariance,
        "source": r.source.source.value,
        "origin": r.source.origin,
        "derived_from": r.derived_from,
        "deleted": r.deleted,
        "consolidated_into": r.consolidated_into,
        "superseded_by": r.superseded_by,
        "embedding": [float(x) for x in r.embedding],
    }


def _record_from_dict(d: dict[str, Any]) -> MemoryRecord:
    return MemoryRecord(
        id=int(d["id"]),
        content=str(d["content"]),
        kind=MemoryKind(d["kind"]),
        created_at=float(d["created_at"]),
        fsrs=FsrsState(float(d["stability"]), float(d["difficulty"]), float(d["last_review"])),
        utility=UtilityState(float(d["trust"]), float(d["covariance"])),
        embedding=np.asarray(d["embedding"], dtype=np.float64),
        source=SourceTag(Source(d["source"]), d["origin"]),
        derived_from=[int(x) for x in d["derived_from"]],
        deleted=bool(d["deleted"]),
        consolidated_into=d["consolidated_into"],
        superseded_by=d["superseded_by"],
    )


def dump_lines(store: MemoryStore) -> Iterator[str]:
    lines = [_dumps({
        "format": FORMAT,
        "version": VERSION,
        "embedding_dim": store.dim,
        "fingerprint": store.config.fingerprint(),
        "next_id": store.next_id,
    })]
    lines.extend(_dumps(_record_to_dict(r)) for r in store.all_records())
    lines.append(_dumps({"type": "removed", "ids": sorted(store.removed)}))
    lines.append(_dumps({"type": "session", "last_retrieved": list(store.last_retrieved)}))
    graph = store.graph
    lines.extend(_dumps({"type": "count", "id": i, "n": n}) for i, n in sorted(graph.retrieval_count.items()))
    lines.extend(_dumps({"type": "pair", "a": a, "b": b, "n": n}) for (a, b), n in sorted(graph.pair_count.items()))
    lines.append(_dumps({"type": "end", "lines": len(lines) + 1}))
    for line in lines:
        yield line + "\n"


def save_snapshot(store: MemoryStore, path: str | Path) -> int:
    """Write the store atomically; returns the number of records written."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with store.writer:
        try:
            with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
                fh.writelines(dump_lines(store))
            os.replace(tmp, path)
        except OSError as exc:
            raise IoFailure(f"cannot write snapshot {path}: {exc}") from exc
        return len(store.records)


def load_snapshot(
    path: str | Path,
    config: GovernanceConfig | None = None,
    embedder: Embedder | None = None,
) -> MemoryStore:
    config = config or GovernanceConfig()
    try:
        with open(path, encoding="utf-8", newline="\n") as fh:
            raw = fh.read()
    except (OSError, UnicodeDecodeError) as exc:
        raise IoFailure(f"cannot read snapshot {path}: {exc}") from exc

    lines = raw.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    else:
        # last line lacks its newline: truncated mid-record
        if lines:
            raise CorruptRecord(len(lines), "truncated line")
    if not lines:
        raise CorruptRecord(1, "missing header")

    def parse(n: int, text: str) -> dict[str, Any]:
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise CorruptRecord(n, f"invalid JSON: {exc.msg}") from exc
        if not isinstance(obj, dict):
            raise CorruptRecord(n, "expected an object")
        return obj

    header = parse(1, lines[0])
    if header.get("format") != FORMAT or header.get("version") != VERSION:
        raise CorruptRecord(1, "unrecognised header")
    if header.get("embedding_dim") != config.embedding_dim:
        raise ConfigMismatch(
            f"snapshot embedding dimension {header.get('embedding_dim')} != config {config.embedding_dim}"
        )
    if header.get("fingerprint") != config.fingerprint():
        raise ConfigMismatch(f"snapshot fingerprint {header.get('fingerprint')} != config {config.fingerprint()}")

    store = MemoryStore(config, embedder)
    ended = False
    for n, text in enumerate(lines[1:], start=2):
        if ended:
            raise CorruptRecord(n, "content after end marker")
        obj = parse(n, text)
        kind = obj.get("type")
        try:
            if kind == "record":
                record = _record_from_dict(obj)
                if record.embedding.shape != (config.embedding_dim,):
                    raise CorruptRecord(n, "embedding dimension mismatch")
                store.records[record.id] = record
            elif kind == "removed":
                store.removed = {int(i) for i in obj["ids"]}
            elif kind == "session":
                store.last_retrieved = [int(i) for i in obj["last_retrieved"]]
            elif kind == "count":
                store.graph.retrieval_count[int(obj["id"])] = int(obj["n"])
            elif kind == "pair":
                store.graph.pair_count[(int(obj["a"]), int(obj["b"]))] = int(obj["n"])
            elif kind == "end":
                if obj.get("lines") != n:
                    raise CorruptRecord(n, "line count mismatch")
                ended = True
            else:
                raise CorruptRecord(n, f"unknown line type {kind!r}")
        except (KeyError, TypeError, ValueError) as exc:
            raise CorruptRecord(n, f"malformed {kind} line: {exc}") from exc
    if not ended:
        raise CorruptRecord(len(lines) + 1, "missing end marker")
    store.next_id = int(header["next_id"])
    store.touch()
    return store

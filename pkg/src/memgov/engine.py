"""One governed memory: store, co-occurrence graph, adapters and config wired together.

The HTTP service, the CLI and the simulation harness all drive this class,
so identical inputs give identical results on every surface.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

from .adapters import AdapterSuite
from .config import GovernanceConfig
from .errors import WriteRejected
from .governance import admit_write, detect_conflicts, forget_cascade, resolve_conflict, ConflictVerdict
from .lifecycle import MaintenanceReport, run_maintenance
from .model import MemoryId, MemoryKind, MemoryRecord, SourceTag, Source
from .retrieval import ContextBundle, QueryIntent, retrieve_context
from .snapshot import load_snapshot, save_snapshot
from .store import MemoryStore
from .utility import ReflectReport, reflect


class Engine:
    def __init__(
        self,
        config: GovernanceConfig | None = None,
        adapters: AdapterSuite | None = None,
        store: MemoryStore | None = None,
    ) -> None:
        self.config = config or GovernanceConfig()
        self.adapters = adapters or AdapterSuite.mock(self.config.embedding_dim)
        self.store = store or MemoryStore(self.config, self.adapters.embedder)

    @classmethod
    def open(
        cls,
        path: str | Path | None,
        config: GovernanceConfig | None = None,
        adapters: AdapterSuite | None = None,
    ) -> Engine:
        """Load ``path`` if it exists, otherwise start empty."""
        config = config or GovernanceConfig()
        adapters = adapters or AdapterSuite.mock(config.embedding_dim)
        if path is not None and Path(path).exists():
            return cls(config, adapters, load_snapshot(path, config, adapters.embedder))
        return cls(config, adapters)

    @property
    def graph(self):
        return self.store.graph

    def save(self, path: str | Path) -> int:
        return save_snapshot(self.store, path)

    def ingest(
        self,
        content: str,
        now: float,
        source: SourceTag | Source | str = Source.USER,
        kind: MemoryKind = MemoryKind.EPISODIC,
        derived_from: Sequence[MemoryId] = (),
    ) -> MemoryId:
        """Guarded write. Raises WriteRejected without touching the store."""
        decision = admit_write(content, self.adapters.guard)
        if not decision.admitted:
            raise WriteRejected(decision.reason or "rejected")
        with self.store.writer:
            memory_id = self.store.insert_memory(content, kind, SourceTag.parse(source), derived_from, now)
            if self.config.auto_resolve_conflicts:
                record = self.store.records[memory_id]
                for other in detect_conflicts(self.store, record):
                    resolve_conflict(self.store, memory_id, other, now)
        return memory_id

    def get(self, memory_id: MemoryId) -> MemoryRecord:
        return self.store.get_memory(memory_id)

    def query(self, text: str, now: float, intent: QueryIntent | None = None) -> ContextBundle:
        bundle = retrieve_context(text, self.store, self.store.graph, self.adapters, self.config, now, intent)
        with self.store.writer:
            self.store.last_retrieved = bundle.ids
        return bundle

    def feedback(self, answer: str, now: float, retrieved: Sequence[MemoryId] | None = None) -> ReflectReport:
        """Reflect on an answer; defaults to the memories admitted by the last query."""
        ids = list(self.store.last_retrieved if retrieved is None else retrieved)
        return reflect(self.store, answer, ids, now)

    def maintain(self, now: float) -> MaintenanceReport:
        return run_maintenance(self.store, now, self.adapters.summarizer)

    def forget(self, memory_id: MemoryId) -> list[MemoryId]:
        return forget_cascade(self.store, memory_id)

    def resolve(self, new_id: MemoryId, old_id: MemoryId, now: float) -> ConflictVerdict:
        return resolve_conflict(self.store, new_id, old_id, now)

    def health(self) -> dict:
        return {"status": "ok", "records": len(self.store), "fingerprint": self.config.fingerprint()}

"""The memory store and its brute-force cosine index.

Mutations are serialized through ``store.writer`` (a re-entrant lock); reads
work from an immutable snapshot of the index so they never observe a
half-applied write.
"""

from __future__ import annotations

import hashlib
import threading
from typing import Sequence

import numpy as np

from .adapters import Embedder, MockEmbedder
from .config import GovernanceConfig
from .errors import DimensionMismatch, EmptyContent, NotFound, Tombstoned, UnknownParent
from .model import (
    CoOccurrenceGraph,
    FsrsState,
    MemoryId,
    MemoryKind,
    MemoryRecord,
    SourceTag,
    UtilityState,
)


class MemoryStore:
    def __init__(self, config: GovernanceConfig | None = None, embedder: Embedder | None = None) -> None:
        self.config = config or GovernanceConfig()
        self.embedder = embedder or MockEmbedder(self.config.embedding_dim)
        if self.embedder.dim != self.config.embedding_dim:
            raise DimensionMismatch(self.config.embedding_dim, self.embedder.dim)
        self.records: dict[MemoryId, MemoryRecord] = {}
        # ids whose records were physically removed; never reissued
        self.removed: set[MemoryId] = set()
        self.graph = CoOccurrenceGraph()
        self.last_retrieved: list[MemoryId] = []
        self.next_id: MemoryId = 1
        self.writer = threading.RLock()
        self._version = 0
        self._index: tuple[int, np.ndarray, np.ndarray] | None = None

    @property
    def dim(self) -> int:
        return self.config.embedding_dim

    def __len__(self) -> int:
        return sum(1 for r in self.records.values() if r.live)

    def touch(self) -> None:
        """Invalidate the cached index after an in-place record mutation."""
        self._version += 1

    # -- writes ------------------------------------------------------------

    def insert_memory(
        self,
        content: str,
        kind: MemoryKind,
        source: SourceTag,
        derived_from: Sequence[MemoryId] = (),
        now: float = 0.0,
        *,
        stability: float | None = None,
        difficulty: float | None = None,
        embedding: np.ndarray | None = None,
    ) -> MemoryId:
        if not content or not content.strip():
            raise EmptyContent()
        with self.writer:
            for parent in derived_from:
                record = self.records.get(parent)
                if record is None or record.deleted:
                    raise UnknownParent(parent)
            if embedding is None:
                embedding = self.embedder.embed(content)
            embedding = np.asarray(embedding, dtype=np.float64)
            if embedding.shape != (self.dim,):
                raise DimensionMismatch(self.dim, int(embedding.size))
            cfg = self.config
            memory_id = self.next_id
            self.records[memory_id] = MemoryRecord(
                id=memory_id,
                content=content,
                kind=MemoryKind(kind),
                created_at=float(now),
                fsrs=FsrsState(
                    stability=float(stability if stability is not None else cfg.fsrs_S0),
                    difficulty=float(difficulty if difficulty is not None else cfg.fsrs_D0),
                    last_review=float(now),
                ),
                utility=UtilityState(trust=cfg.kalman_U0, covariance=cfg.kalman_P0),
                embedding=embedding,
                source=source,
                derived_from=list(dict.fromkeys(derived_from)),
            )
            self.next_id += 1
            self.touch()
            return memory_id

    def tombstone(self, memory_id: MemoryId) -> None:
        with self.writer:
            self._lookup(memory_id).deleted = True
            self.touch()

    def sweep(self) -> list[MemoryId]:
        """Physically remove tombstoned records not retained as consolidation sources."""
        with self.writer:
            doomed = sorted(i for i, r in self.records.items() if r.deleted and r.consolidated_into is None)
            for memory_id in doomed:
                del self.records[memory_id]
                self.removed.add(memory_id)
            if doomed:
                self.touch()
            return doomed

    # -- reads -------------------------------------------------------------

    def _lookup(self, memory_id: MemoryId) -> MemoryRecord:
        record = self.records.get(memory_id)
        if record is None:
            if memory_id in self.removed:
                raise Tombstoned(memory_id)
            raise NotFound(memory_id)
        return record

    def get_memory(self, memory_id: MemoryId) -> MemoryRecord:
        record = self._lookup(memory_id)
        if record.deleted:
            raise Tombstoned(memory_id)
        return record

    def get_any(self, memory_id: MemoryId) -> MemoryRecord:
        """Like get_memory but also returns tombstoned records still held."""
        return self._lookup(memory_id)

    def was_issued(self, memory_id: MemoryId) -> bool:
        return memory_id in self.records or memory_id in self.removed

    def live_records(self) -> list[MemoryRecord]:
        return [r for _, r in sorted(self.records.items()) if r.live]

    def all_records(self) -> list[MemoryRecord]:
        return [r for _, r in sorted(self.records.items())]

    def children_of(self, memory_id: MemoryId) -> list[MemoryId]:
        return sorted(r.id for r in self.records.values() if memory_id in r.derived_from)

    def _snapshot_index(self) -> tuple[np.ndarray, np.ndarray]:
        cached = self._index
        if cached is not None and cached[0] == self._version:
            return cached[1], cached[2]
        with self.writer:
            version = self._version
            live = self.live_records()
            ids = np.array([r.id for r in live], dtype=np.int64)
            matrix = (np.vstack([r.embedding for r in live]) if live
                      else np.zeros((0, self.dim), dtype=np.float64))
            self._index = (version, ids, matrix)
            return ids, matrix

    def nearest_neighbors(self, query_embedding: np.ndarray, k: int) -> list[tuple[MemoryId, float]]:
        """Exact top-k live records by cosine similarity; ties go to the smaller id."""
        query = np.asarray(query_embedding, dtype=np.float64)
        if query.ndim != 1 or query.shape[0] != self.dim:
            raise DimensionMismatch(self.dim, int(query.shape[-1]) if query.ndim else 0)
        if k <= 0:
            raise ValueError("k must be positive")
        ids, matrix = self._snapshot_index()
        if ids.size == 0:
            return []
        norms = np.linalg.norm(matrix, axis=1)
        qnorm = float(np.linalg.norm(query))
        dots = matrix @ query
        with np.errstate(divide="ignore", invalid="ignore"):
            sims = np.where((norms > 0) & (qnorm > 0), dots / (norms * qnorm), 0.0)
        sims = np.clip(sims, -1.0, 1.0)
        order = np.lexsort((ids, -sims))[:k]
        return [(int(ids[i]), float(sims[i])) for i in order]

    def state_hash(self) -> str:
        """Digest of the full store state, for no-mutation checks."""
        from .snapshot import dump_lines

        h = hashlib.sha256()
        for line in dump_lines(self):
            h.update(line.encode("utf-8"))
        return h.hexdigest()

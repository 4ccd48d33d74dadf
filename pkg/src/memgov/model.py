"""Domain types for governed memories."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable

import numpy as np

SECONDS_PER_DAY = 86400.0

MemoryId = int


class MemoryKind(str, enum.Enum):
    EPISODIC = "episodic"
    SEMANTIC = "semantic"


class Source(str, enum.Enum):
    USER = "user"
    AGENT = "agent"
    EXTERNAL = "external"


@dataclass(frozen=True)
class SourceTag:
    source: Source = Source.USER
    origin: str | None = None

    @classmethod
    def parse(cls, value: str | Source | SourceTag) -> SourceTag:
        if isinstance(value, SourceTag):
            return value
        return cls(Source(value))


@dataclass
class FsrsState:
    stability: float  # days
    difficulty: float  # [1, 10]
    last_review: float  # seconds since epoch


@dataclass
class UtilityState:
    trust: float
    covariance: float


@dataclass(eq=False)
class MemoryRecord:
    id: MemoryId
    content: str
    kind: MemoryKind
    created_at: float
    fsrs: FsrsState
    utility: UtilityState
    embedding: np.ndarray
    source: SourceTag
    derived_from: list[MemoryId] = field(default_factory=list)
    deleted: bool = False
    # set while a tombstoned consolidation source is retained for provenance
    consolidated_into: MemoryId | None = None
    # conflict loser: excluded from retrieval, kept for audit
    superseded_by: MemoryId | None = None

    @property
    def live(self) -> bool:
        return not self.deleted

    @property
    def retrievable(self) -> bool:
        return not self.deleted and self.superseded_by is None

    def elapsed_days(self, now: float) -> float:
        return max(0.0, (now - self.fsrs.last_review) / SECONDS_PER_DAY)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MemoryRecord):
            return NotImplemented
        return (
            self.id == other.id
            and self.content == other.content
            and self.kind == other.kind
            and self.created_at == other.created_at
            and self.fsrs == other.fsrs
            and self.utility == other.utility
            and np.array_equal(self.embedding, other.embedding)
            and self.source == other.source
            and self.derived_from == other.derived_from
            and self.deleted == other.deleted
            and self.consolidated_into == other.consolidated_into
            and self.superseded_by == other.superseded_by
        )


@dataclass
class CoOccurrenceGraph:
    """Co-retrieval counts. Pair counts are stored once per unordered pair."""

    retrieval_count: dict[MemoryId, int] = field(default_factory=dict)
    pair_count: dict[tuple[MemoryId, MemoryId], int] = field(default_factory=dict)

    def count(self, a: MemoryId) -> int:
        return self.retrieval_count.get(a, 0)

    def pair(self, a: MemoryId, b: MemoryId) -> int:
        return self.pair_count.get((min(a, b), max(a, b)), 0)

    def conditional(self, b: MemoryId, given: MemoryId) -> float:
        """P(b | given) = Count(given ∩ b) / Count(given); 0 when given was never retrieved."""
        n = self.count(given)
        return self.pair(given, b) / n if n else 0.0

    def neighbours(self, a: MemoryId) -> list[MemoryId]:
        out = []
        for (x, y) in self.pair_count:
            if x == a:
                out.append(y)
            elif y == a:
                out.append(x)
        return sorted(out)

    def record(self, ids: Iterable[MemoryId]) -> None:
        unique = sorted(set(ids))
        for a in unique:
            self.retrieval_count[a] = self.retrieval_count.get(a, 0) + 1
        for a, b in combinations(unique, 2):
            self.pair_count[(a, b)] = self.pair_count.get((a, b), 0) + 1

    def remove(self, ids: Iterable[MemoryId]) -> None:
        gone = set(ids)
        for a in gone:
            self.retrieval_count.pop(a, None)
        for key in [k for k in self.pair_count if k[0] in gone or k[1] in gone]:
            del self.pair_count[key]

    def copy(self) -> CoOccurrenceGraph:
        return CoOccurrenceGraph(dict(self.retrieval_count), dict(self.pair_count))

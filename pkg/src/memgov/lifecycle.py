"""Forgetting curve, stability growth, the entropy probe and the maintenance pass."""

from __future__ import annotations

import logging
import math
import zlib
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .adapters import Summarizer
from .errors import DomainError, EmptyCorpus, NonPositiveStability
from .model import MemoryId, MemoryKind, MemoryRecord, Source, SourceTag
from .store import MemoryStore

logger = logging.getLogger(__name__)

FSRS_FACTOR = 19 / 9


def retrievability(stability: float, elapsed_days: float, factor: float = FSRS_FACTOR) -> float:
    """Power-law recall probability ``(1 + factor * t / S) ** -1``."""
    if not stability > 0:
        raise NonPositiveStability(stability)
    if elapsed_days < 0:
        raise DomainError(f"elapsed time must be non-negative, got {elapsed_days!r}")
    return 1.0 / (1.0 + factor * elapsed_days / stability)


def stability_multiplier(difficulty: float, r: float, growth: float = 0.5, exponent: float = 1.5) -> float:
    return 1.0 + growth * (11.0 - difficulty) * (math.exp(exponent * (1.0 - r)) - 1.0)


def update_stability(
    stability: float,
    difficulty: float,
    r: float,
    growth: float = 0.5,
    exponent: float = 1.5,
) -> float:
    """Stability after a successful recall at retrievability ``r``.

    Recalls of nearly-forgotten memories (small ``r``) earn the largest boost.
    """
    if not stability > 0:
        raise NonPositiveStability(stability)
    if not 1.0 <= difficulty <= 10.0:
        raise DomainError(f"difficulty must lie in [1, 10], got {difficulty!r}")
    if not 0.0 < r <= 1.0:
        raise DomainError(f"retrievability must lie in (0, 1], got {r!r}")
    return stability * stability_multiplier(difficulty, r, growth, exponent)


def entropy_ratio(contents: Sequence[str]) -> float:
    """Compressed/raw byte ratio of the newline-joined contents (DEFLATE, default level)."""
    raw = "\n".join(contents).encode("utf-8")
    if not raw:
        raise EmptyCorpus()
    return len(zlib.compress(raw)) / len(raw)


def entropy_triggered(ratio: float, threshold: float = 0.4) -> bool:
    return ratio < threshold


def current_r(record: MemoryRecord, now: float, factor: float = FSRS_FACTOR) -> float:
    return retrievability(record.fsrs.stability, record.elapsed_days(now), factor)


@dataclass
class MaintenanceReport:
    deleted: list[MemoryId] = field(default_factory=list)
    consolidated_groups: list[tuple[list[MemoryId], MemoryId]] = field(default_factory=list)
    kept: int = 0
    kept_ids: list[MemoryId] = field(default_factory=list)
    entropy_ratio_observed: float = 1.0
    triggered: bool = False
    swept: list[MemoryId] = field(default_factory=list)

    @property
    def consolidated_sources(self) -> list[MemoryId]:
        return [i for sources, _ in self.consolidated_groups for i in sources]

    def audit_lines(self) -> list[str]:
        lines = [f"ENTROPY {self.entropy_ratio_observed:.6f} {'TRIGGERED' if self.triggered else 'IDLE'}"]
        lines += [f"SWEEP {i}" for i in self.swept]
        lines += [f"DELETE {i}" for i in self.deleted]
        for sources, new_id in self.consolidated_groups:
            lines += [f"CONSOLIDATE {i} -> {new_id}" for i in sources]
        lines += [f"KEEP {i}" for i in self.kept_ids]
        return lines

    def to_dict(self) -> dict:
        return {
            "triggered": self.triggered,
            "entropy_ratio": self.entropy_ratio_observed,
            "deleted": self.deleted,
            "consolidated": [{"sources": s, "into": n} for s, n in self.consolidated_groups],
            "kept": self.kept,
            "swept": self.swept,
        }


def _group_by_similarity(records: list[MemoryRecord], threshold: float) -> list[list[MemoryRecord]]:
    """Greedy clustering: each unassigned record seeds a group and absorbs later records
    whose cosine to the seed is at least ``threshold``."""
    groups: list[list[MemoryRecord]] = []
    assigned: set[MemoryId] = set()
    for i, seed in enumerate(records):
        if seed.id in assigned:
            continue
        group = [seed]
        assigned.add(seed.id)
        for other in records[i + 1:]:
            if other.id not in assigned and float(np.dot(seed.embedding, other.embedding)) >= threshold:
                group.append(other)
                assigned.add(other.id)
        groups.append(group)
    return groups


def run_maintenance(store: MemoryStore, now: float, summarizer: Summarizer) -> MaintenanceReport:
    """One background hygiene pass.

    Tombstones left by earlier forget cascades are swept first. If the
    episodic log is redundant enough to trigger, low-retrievability episodic
    records are deleted, the middle band is consolidated into semantic
    records, and the rest are kept. Summaries are produced before any
    mutation so a summarizer failure leaves the store untouched.
    """
    cfg = store.config
    report = MaintenanceReport()
    with store.writer:
        episodic = [r for r in store.live_records() if r.kind is MemoryKind.EPISODIC]
        if cfg.entropy_window > 0:
            probe = episodic[-cfg.entropy_window:]
        else:
            probe = episodic
        if probe:
            report.entropy_ratio_observed = entropy_ratio([r.content for r in probe])
            report.triggered = entropy_triggered(report.entropy_ratio_observed, cfg.entropy_threshold)

        to_delete: list[MemoryRecord] = []
        band: list[MemoryRecord] = []
        keep: list[MemoryRecord] = []
        if report.triggered:
            for record in episodic:
                r = current_r(record, now, cfg.fsrs_factor)
                if r < cfg.lifecycle_delete_below:
                    to_delete.append(record)
                elif r <= cfg.lifecycle_consolidate_upto:
                    band.append(record)
                else:
                    keep.append(record)

        staged = []
        for group in _group_by_similarity(band, cfg.lifecycle_group_similarity):
            summary = summarizer.summarize([r.content for r in group])
            staged.append((group, summary, store.embedder.embed(summary)))

        # commit
        report.swept = store.sweep()
        for record in to_delete:
            record.deleted = True
            report.deleted.append(record.id)
        for group, summary, embedding in staged:
            new_id = store.insert_memory(
                summary,
                MemoryKind.SEMANTIC,
                SourceTag(Source.AGENT, "consolidation"),
                [r.id for r in group],
                now,
                stability=max(r.fsrs.stability for r in group),
                difficulty=cfg.fsrs_D0,
                embedding=embedding,
            )
            for r in group:
                r.deleted = True
                r.consolidated_into = new_id
            report.consolidated_groups.append(([r.id for r in group], new_id))
        report.kept_ids = [r.id for r in keep]
        report.kept = len(keep)
        if to_delete:
            store.graph.remove(report.deleted)
            store.sweep()
        store.touch()
    if report.triggered:
        logger.info(
            "maintenance: ratio=%.3f deleted=%d consolidated=%d kept=%d",
            report.entropy_ratio_observed, len(report.deleted), len(report.consolidated_sources), report.kept,
        )
    return report

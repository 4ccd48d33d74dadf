"""Trust tracking: a scalar Kalman filter fed by binary usage feedback."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .errors import DomainError
from .lifecycle import current_r, update_stability
from .model import MemoryId, UtilityState
from .store import MemoryStore
from .text import content_words, words


def kalman_step(state: UtilityState, z: float, q: float = 0.05, r_noise: float = 0.1) -> tuple[UtilityState, float]:
    """One predict/update cycle. Returns the posterior state and the gain used."""
    if not q > 0 or not r_noise > 0:
        raise DomainError("process and measurement noise must be positive")
    if not state.covariance > 0:
        raise DomainError("covariance must be positive")
    p_prior = state.covariance + q
    gain = p_prior / (p_prior + r_noise)
    trust = state.trust + gain * (z - state.trust)
    return UtilityState(trust=trust, covariance=(1.0 - gain) * p_prior), gain


def detect_usage(answer: str, memory_content: str, threshold: float = 0.3) -> tuple[bool, float]:
    """Share of the memory's content words that appear in the answer."""
    if not answer or not answer.strip():
        raise DomainError("answer must be non-empty")
    memory_words = set(content_words(memory_content))
    if not memory_words:
        return False, 0.0
    overlap = len(memory_words & set(words(answer))) / len(memory_words)
    return overlap >= threshold, overlap


@dataclass
class ReflectEntry:
    memory_id: MemoryId
    used: bool
    overlap: float
    trust_before: float
    trust_after: float
    gain: float
    stability_before: float
    stability_after: float

    def to_dict(self) -> dict:
        return {
            "id": self.memory_id,
            "used": self.used,
            "overlap": self.overlap,
            "U_before": self.trust_before,
            "U_after": self.trust_after,
            "K": self.gain,
            "S_before": self.stability_before,
            "S_after": self.stability_after,
        }


@dataclass
class ReflectReport:
    entries: list[ReflectEntry] = field(default_factory=list)

    @property
    def used(self) -> list[MemoryId]:
        return [e.memory_id for e in self.entries if e.used]

    @property
    def unused(self) -> list[MemoryId]:
        return [e.memory_id for e in self.entries if not e.used]

    def to_dict(self) -> dict:
        return {"used": self.used, "unused": self.unused, "entries": [e.to_dict() for e in self.entries]}


def reflect(store: MemoryStore, answer: str, retrieved: Sequence[MemoryId], now: float) -> ReflectReport:
    """Close the feedback loop for one generated answer.

    Every retrieved memory gets a Kalman update (z=1 if used, else 0). Used
    memories also get review credit: stability grows according to their
    retrievability at ``now`` and the forgetting curve restarts.
    """
    cfg = store.config
    report = ReflectReport()
    if not retrieved:
        return report
    with store.writer:
        records = [store.get_memory(i) for i in dict.fromkeys(retrieved)]
        for record in records:
            used, overlap = detect_usage(answer, record.content, cfg.usage_threshold)
            before = record.utility
            after, gain = kalman_step(before, 1.0 if used else 0.0, cfg.kalman_Q, cfg.kalman_R)
            s_before = record.fsrs.stability
            if used:
                r = current_r(record, now, cfg.fsrs_factor)
                record.fsrs.stability = update_stability(
                    s_before, record.fsrs.difficulty, r, cfg.fsrs_w8, cfg.fsrs_difficulty_exponent
                )
                record.fsrs.last_review = max(record.fsrs.last_review, float(now))
            record.utility = after
            report.entries.append(ReflectEntry(
                record.id, used, overlap, before.trust, after.trust, gain, s_before, record.fsrs.stability,
            ))
        store.touch()
    return report

"""Conflict adjudication, the forget cascade and the write-path guard."""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass

from .adapters import Guard
from .config import GovernanceConfig
from .errors import NotFound, SameRecord
from .model import SECONDS_PER_DAY, MemoryId, MemoryRecord, Source
from .store import MemoryStore
from .text import words

logger = logging.getLogger(__name__)


def source_authority(source: Source, config: GovernanceConfig) -> float:
    return {
        Source.USER: config.auth_user,
        Source.AGENT: config.auth_agent,
        Source.EXTERNAL: config.auth_external,
    }[source]


def conflict_score(record: MemoryRecord, now: float, config: GovernanceConfig) -> float:
    """Source authority times exponential recency ``exp(-age_days / tau)``."""
    age_days = max(0.0, (now - record.created_at) / SECONDS_PER_DAY)
    return source_authority(record.source.source, config) * math.exp(-age_days / config.recency_tau_days)


@dataclass(frozen=True)
class ConflictVerdict:
    winner: MemoryId
    loser: MemoryId
    winner_score: float
    loser_score: float
    action: str = "supersede_loser"

    def to_dict(self) -> dict:
        return {"winner": self.winner, "loser": self.loser, "winner_score": self.winner_score,
                "loser_score": self.loser_score, "action": self.action}


def adjudicate(m_new: MemoryRecord, m_old: MemoryRecord, now: float, config: GovernanceConfig) -> ConflictVerdict:
    if m_new.id == m_old.id:
        raise SameRecord(m_new.id)
    s_new = conflict_score(m_new, now, config)
    s_old = conflict_score(m_old, now, config)
    # on an exact tie the newer record wins
    new_wins = (s_new, m_new.created_at, m_new.id) >= (s_old, m_old.created_at, m_old.id)
    if new_wins:
        return ConflictVerdict(m_new.id, m_old.id, s_new, s_old)
    return ConflictVerdict(m_old.id, m_new.id, s_old, s_new)


def resolve_conflict(store: MemoryStore, new_id: MemoryId, old_id: MemoryId, now: float) -> ConflictVerdict:
    """Adjudicate two contradicting live records and suppress the loser from retrieval."""
    if new_id == old_id:
        raise SameRecord(new_id)
    with store.writer:
        m_new = store.get_memory(new_id)
        m_old = store.get_memory(old_id)
        verdict = adjudicate(m_new, m_old, now, store.config)
        loser = m_new if verdict.loser == m_new.id else m_old
        loser.superseded_by = verdict.winner
        winner = m_old if loser is m_new else m_new
        winner.superseded_by = None
        store.touch()
    return verdict


def conflict_slot(content: str) -> tuple[tuple[str, ...], str] | None:
    """(subject slot, object) split for the bundled detector: all words but the last,
    then the last word. Texts shorter than three words carry no slot."""
    tokens = words(content)
    if len(tokens) < 3:
        return None
    return tuple(tokens[:-1]), tokens[-1]


def detect_conflicts(store: MemoryStore, record: MemoryRecord) -> list[MemoryId]:
    """Live retrievable records sharing the subject slot of ``record`` but not its object."""
    slot = conflict_slot(record.content)
    if slot is None:
        return []
    hits = []
    for other in store.live_records():
        if other.id == record.id or not other.retrievable:
            continue
        other_slot = conflict_slot(other.content)
        if other_slot and other_slot[0] == slot[0] and other_slot[1] != slot[1]:
            hits.append(other.id)
    return hits


def descendants(store: MemoryStore, root: MemoryId) -> list[MemoryId]:
    """Forward closure over derived_from edges: everything built from ``root``, transitively."""
    children: dict[MemoryId, list[MemoryId]] = {}
    for record in store.all_records():
        for parent in record.derived_from:
            children.setdefault(parent, []).append(record.id)
    seen: set[MemoryId] = set()
    queue = deque([root])
    while queue:
        for child in children.get(queue.popleft(), ()):
            if child not in seen:
                seen.add(child)
                queue.append(child)
    seen.discard(root)
    return sorted(seen)


def forget_cascade(store: MemoryStore, root: MemoryId) -> list[MemoryId]:
    """Tombstone ``root`` and every record derived from it, directly or transitively.

    A derived record goes if any of its ancestors goes. Returns the purged
    ids, root first. Physical removal happens at the next maintenance pass.
    """
    with store.writer:
        if not store.was_issued(root):
            raise NotFound(root)
        purged = [root] + descendants(store, root)
        for memory_id in purged:
            record = store.records.get(memory_id)
            if record is not None:
                record.deleted = True
                record.consolidated_into = None
        store.graph.remove(purged)
        store.last_retrieved = [i for i in store.last_retrieved if i not in set(purged)]
        store.touch()
    return purged


@dataclass(frozen=True)
class WriteDecision:
    admitted: bool
    reason: str | None = None


GUARD_UNAVAILABLE = "GuardUnavailable"


def admit_write(content: str, guard: Guard) -> WriteDecision:
    """Run the write guard; an unavailable guard rejects (fail-closed)."""
    try:
        reason = guard.check(content)
    except Exception as exc:  # any guard fault fails closed
        logger.warning("write guard unavailable, rejecting: %s", exc)
        return WriteDecision(False, GUARD_UNAVAILABLE)
    if reason is not None:
        return WriteDecision(False, reason)
    return WriteDecision(True)


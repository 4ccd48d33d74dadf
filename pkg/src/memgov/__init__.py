"""Governed long-term memory for LLM agents: decay, trust, provenance and a retrieval auction."""

from .adapters import AdapterSuite
from .config import GovernanceConfig, load_config
from .engine import Engine
from .governance import admit_write, forget_cascade, resolve_conflict
from .lifecycle import entropy_ratio, retrievability, run_maintenance, update_stability
from .model import CoOccurrenceGraph, MemoryKind, MemoryRecord, Source, SourceTag
from .retrieval import QueryIntent, classify_intent, retrieve_context
from .snapshot import load_snapshot, save_snapshot
from .store import MemoryStore
from .utility import detect_usage, kalman_step, reflect

__version__ = "0.1.0"

__all__ = [
    "AdapterSuite",
    "CoOccurrenceGraph",
    "Engine",
    "GovernanceConfig",
    "MemoryKind",
    "MemoryRecord",
    "MemoryStore",
    "QueryIntent",
    "Source",
    "SourceTag",
    "admit_write",
    "classify_intent",
    "detect_usage",
    "entropy_ratio",
    "forget_cascade",
    "kalman_step",
    "load_config",
    "load_snapshot",
    "reflect",
    "resolve_conflict",
    "retrievability",
    "retrieve_context",
    "run_maintenance",
    "save_snapshot",
    "update_stability",
]

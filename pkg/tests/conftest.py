from __future__ import annotations

from pathlib import Path

import pytest

from memgov import Engine, GovernanceConfig, MemoryStore
from memgov.model import MemoryKind, SourceTag

DAY = 86400.0
T0 = 1_700_000_000.0
FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

# acceptance criterion -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE_RESULTS: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def config() -> GovernanceConfig:
    return GovernanceConfig()


@pytest.fixture
def store(config: GovernanceConfig) -> MemoryStore:
    return MemoryStore(config)


@pytest.fixture
def engine() -> Engine:
    return Engine()


def add(store: MemoryStore, content: str, now: float = T0, kind=MemoryKind.EPISODIC,
        source: str = "user", parents=()) -> int:
    return store.insert_memory(content, kind, SourceTag.parse(source), list(parents), now)


def set_decay(store: MemoryStore, memory_id: int, stability: float, elapsed_days: float, now: float) -> None:
    """Place a record on its forgetting curve: given S, last reviewed ``elapsed_days`` before ``now``."""
    record = store.records[memory_id]
    record.fsrs.stability = stability
    record.fsrs.last_review = now - elapsed_days * DAY
    store.touch()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE_RESULTS, key=lambda n: int(n.split()[0][1:])):
        passed, detail = ACCEPTANCE_RESULTS[name]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}  {detail}")

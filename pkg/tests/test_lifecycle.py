from __future__ import annotations

import math
import random
import string
import zlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import T0, add, set_decay
from memgov import MemoryStore, entropy_ratio, retrievability, run_maintenance, update_stability
from memgov.adapters import MockSummarizer
from memgov.errors import AdapterUnavailable, DomainError, EmptyCorpus, NonPositiveStability
from memgov.lifecycle import current_r, entropy_triggered, stability_multiplier
from memgov.model import MemoryKind

# (stability, elapsed days) pairs whose retrievability is exactly the target in floating point
AT_R = {0.1: (19, 81), 0.3: (19, 21), 0.5: (19, 9), 0.7: (133, 27), 0.9: (19, 1)}
CHATTER = "the user chatted about the weather and the weekend plans again. " * 4
SENTENCE = "The user asked the assistant about the weather today."  # 54 chars


def chatter(tag: str) -> str:
    return f"{CHATTER}topic {tag}"


def seeded_store(targets: list[float], now: float = T0) -> tuple[MemoryStore, list[int]]:
    store = MemoryStore()
    ids = []
    for r in targets:
        mid = add(store, chatter(f"r{r}"), now=now - 200 * 86400)
        set_decay(store, mid, *AT_R[r], now)
        ids.append(mid)
    return store, ids


class FailingSummarizer:
    def summarize(self, memories):
        raise AdapterUnavailable("summarizer down")


# -- retrievability --------------------------------------------------------


@pytest.mark.parametrize("s", [0.1, 1.0, 10.0, 1000.0])
def test_no_elapsed_time_means_full_recall(s):
    assert retrievability(s, 0.0) == 1.0


def test_calibration_point():
    assert retrievability(10, 10) == pytest.approx(9 / 28, abs=1e-12)


def test_twice_the_stability():
    assert retrievability(10, 20) == pytest.approx(9 / 47, abs=1e-12)


@pytest.mark.parametrize("s", [0.0, -1.0])
def test_non_positive_stability(s):
    with pytest.raises(NonPositiveStability):
        retrievability(s, 1.0)


def test_negative_elapsed_time():
    with pytest.raises(DomainError):
        retrievability(1.0, -0.5)


def test_monotone_over_grid():
    grid_s = [0.1 * 1.5 ** i for i in range(20)]
    grid_t = [0.0] + [0.05 * 1.6 ** i for i in range(20)]
    for s in grid_s:
        rs = [retrievability(s, t) for t in grid_t]
        assert all(a > b for a, b in zip(rs, rs[1:]))
    for t in grid_t[1:]:
        rs = [retrievability(s, t) for s in grid_s]
        assert all(a < b for a, b in zip(rs, rs[1:]))


@given(st.floats(min_value=1e-3, max_value=1e6))
def test_calibration_holds_for_every_stability(s):
    assert retrievability(s, s) == pytest.approx(9 / 28, abs=1e-12)


# -- stability update -------------------------------------------------------


def test_perfect_recall_gives_no_growth():
    assert update_stability(10, 5, 1.0) == 10.0


def test_desirable_difficulty_bonus():
    assert math.exp(1.5 * (1 - 0.1)) - 1 == pytest.approx(2.857, abs=1e-3)


def test_stability_update_value():
    assert update_stability(10, 5, 0.32) == pytest.approx(10 * (1 + 3 * (math.exp(1.02) - 1)), rel=1e-12)
    assert update_stability(10, 5, 0.32) == pytest.approx(63.20, abs=5e-3)


@pytest.mark.parametrize("args", [(0, 5, 0.5), (10, 0.5, 0.5), (10, 10.5, 0.5), (10, 5, 0.0), (10, 5, 1.01)])
def test_stability_domain(args):
    with pytest.raises(DomainError):
        update_stability(*args)


def test_multiplier_bounds_and_monotonicity():
    rs = np.linspace(0.01, 1.0, 60)
    ds = np.linspace(1.0, 10.0, 60)
    upper = 1 + 0.5 * 10 * (math.exp(1.5) - 1)
    prev_row = None
    for d in ds:
        row = [update_stability(1.0, d, r) for r in rs]
        assert all(1.0 <= m <= upper + 1e-12 for m in row)
        assert all(a >= b for a, b in zip(row, row[1:]))
        if prev_row is not None:
            assert all(a <= b for a, b in zip(row, prev_row))
        prev_row = row
    assert upper == pytest.approx(18.408, abs=1e-3)


# -- entropy probe ----------------------------------------------------------


def test_repetitive_log_triggers():
    assert len(SENTENCE) >= 50
    ratio = entropy_ratio([SENTENCE] * 100)
    raw = "\n".join([SENTENCE] * 100).encode()
    assert ratio == len(zlib.compress(raw)) / len(raw)
    assert ratio < 0.1
    assert entropy_triggered(ratio)


def test_random_alphanumerics_do_not_trigger():
    rng = random.Random(11)
    text = "".join(rng.choice(string.ascii_letters + string.digits) for _ in range(6000))
    ratio = entropy_ratio([text])
    assert ratio > 0.4
    assert not entropy_triggered(ratio)


def test_threshold_is_strict():
    assert not entropy_triggered(0.4)
    assert entropy_triggered(0.3999999)


def test_empty_corpus():
    with pytest.raises(EmptyCorpus):
        entropy_ratio([])
    with pytest.raises(EmptyCorpus):
        entropy_ratio([""])


# -- maintenance ------------------------------------------------------------


def test_partition_delete_consolidate_keep():
    store, (low, mid, high) = seeded_store([0.1, 0.5, 0.9])
    report = run_maintenance(store, T0, MockSummarizer())
    assert report.triggered
    assert report.deleted == [low]
    assert report.consolidated_sources == [mid]
    assert report.kept == 1 and report.kept_ids == [high]
    (sources, new_id), = report.consolidated_groups
    summary = store.get_memory(new_id)
    assert summary.kind is MemoryKind.SEMANTIC
    assert summary.derived_from == sources == [mid]
    assert low not in store.records and low in store.removed
    assert store.records[mid].deleted and store.records[mid].consolidated_into == new_id


def test_boundaries_consolidate():
    store, ids = seeded_store([0.3, 0.7])
    assert [current_r(store.records[i], T0) for i in ids] == [0.3, 0.7]
    report = run_maintenance(store, T0, MockSummarizer())
    assert sorted(report.consolidated_sources) == ids
    assert report.deleted == [] and report.kept == 0


def test_no_trigger_means_no_mutation():
    rng = random.Random(5)
    store = MemoryStore()
    for _ in range(3):
        mid = add(store, "".join(rng.choice(string.ascii_letters) for _ in range(400)))
        set_decay(store, mid, 1.0, 100.0, T0)
    before = store.state_hash()
    report = run_maintenance(store, T0, MockSummarizer())
    assert not report.triggered
    assert report.deleted == [] and report.consolidated_groups == [] and report.kept == 0
    assert store.state_hash() == before


def test_idempotent_at_same_time():
    store, _ = seeded_store([0.1, 0.3, 0.5, 0.7, 0.9])
    run_maintenance(store, T0, MockSummarizer())
    after_first = store.state_hash()
    second = run_maintenance(store, T0, MockSummarizer())
    assert store.state_hash() == after_first
    assert second.deleted == [] and second.consolidated_groups == []


def test_no_low_retrievability_episodic_survives():
    rng = random.Random(2)
    store = MemoryStore()
    for i in range(40):
        mid = add(store, chatter(str(i % 4)))
        set_decay(store, mid, rng.uniform(0.5, 20), rng.uniform(0, 60), T0)
    report = run_maintenance(store, T0, MockSummarizer())
    assert report.triggered
    for record in store.live_records():
        if record.kind is MemoryKind.EPISODIC:
            assert current_r(record, T0) >= 0.3
    scanned = set(report.deleted) | set(report.consolidated_sources) | set(report.kept_ids)
    assert len(scanned) == len(report.deleted) + len(report.consolidated_sources) + report.kept == 40
    for sources, new_id in report.consolidated_groups:
        assert store.records[new_id].derived_from == sources


def test_semantic_records_are_exempt():
    store = MemoryStore()
    ids = [add(store, chatter(str(i))) for i in range(3)]
    sem = add(store, chatter("semantic"), kind=MemoryKind.SEMANTIC, source="agent", parents=ids[:1])
    set_decay(store, sem, 1.0, 500.0, T0)
    for mid in ids:
        set_decay(store, mid, 1.0, 500.0, T0)
    report = run_maintenance(store, T0, MockSummarizer())
    assert sorted(report.deleted) == ids
    assert store.get_memory(sem).live


def test_consolidated_record_inherits_strongest_stability():
    store = MemoryStore()
    a = add(store, chatter("same"))
    b = add(store, chatter("same"))
    set_decay(store, a, 19.0, 9.0, T0)
    set_decay(store, b, 38.0, 18.0, T0)
    report = run_maintenance(store, T0, MockSummarizer())
    (sources, new_id), = report.consolidated_groups
    assert sources == [a, b]
    summary = store.get_memory(new_id)
    assert summary.fsrs.stability == 38.0
    assert summary.fsrs.difficulty == 5.0
    assert summary.fsrs.last_review == T0
    assert summary.content.startswith("CONSOLIDATED: ")


def test_dissimilar_fading_records_are_summarized_separately():
    store = MemoryStore()
    a = add(store, chatter("x") + " " + "alpha bravo charlie delta " * 6)
    b = add(store, chatter("y") + " " + "echo foxtrot golf hotel " * 6)
    for mid in (a, b):
        set_decay(store, mid, 19.0, 9.0, T0)
    assert float(np.dot(store.records[a].embedding, store.records[b].embedding)) < 0.6
    report = run_maintenance(store, T0, MockSummarizer())
    assert [g for g, _ in report.consolidated_groups] == [[a], [b]]


def test_summarizer_failure_aborts_atomically():
    store, _ = seeded_store([0.1, 0.5, 0.9])
    before = store.state_hash()
    with pytest.raises(AdapterUnavailable):
        run_maintenance(store, T0, FailingSummarizer())
    assert store.state_hash() == before


def test_cascade_tombstones_are_swept_next_pass():
    from memgov.governance import forget_cascade

    store, (low, mid, high) = seeded_store([0.1, 0.5, 0.9])
    forget_cascade(store, high)
    assert high in store.records
    report = run_maintenance(store, T0, MockSummarizer())
    assert report.swept == [high]
    assert high not in store.records

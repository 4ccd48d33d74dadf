"""The read path: intent, decomposition, auction scoring, veto gate,
Hebbian expansion and token budgeting."""

from __future__ import annotations

import enum
import logging
import re
from dataclasses import dataclass, field
from statistics import fmean
from typing import Callable, Sequence

from .adapters import AdapterSuite, Decomposer, Entailer
from .config import GovernanceConfig
from .errors import AdapterError, DomainError, EmptyQuery, WindowTooSmall
from .lifecycle import current_r
from .model import CoOccurrenceGraph, MemoryId
from .store import MemoryStore
from .text import estimate_tokens, words

logger = logging.getLogger(__name__)


class QueryIntent(str, enum.Enum):
    FACT = "fact"
    TEMPORAL = "temporal"
    REASONING = "reasoning"
    MULTIHOP = "multihop"


@dataclass(frozen=True)
class ScoringParams:
    lam: float
    beta: float


def scoring_params(intent: QueryIntent, config: GovernanceConfig) -> ScoringParams:
    return {
        QueryIntent.FACT: ScoringParams(config.scoring_fact_lambda, 0.0),
        QueryIntent.TEMPORAL: ScoringParams(config.temporal_lambda, 0.0),
        QueryIntent.REASONING: ScoringParams(config.scoring_reasoning_lambda, 0.0),
        QueryIntent.MULTIHOP: ScoringParams(config.scoring_multihop_lambda, config.scoring_multihop_beta),
    }[intent]


_INTERROGATIVES = {"what", "where", "who", "whom", "whose", "when", "which", "why", "how"}
_CHAINS = re.compile(r"\band then\b|\bof that\b", re.I)
_TEMPORAL = {
    "when", "before", "after", "date", "ago",
    "january", "february", "march", "april", "may", "june", "july",
    "august", "september", "october", "november", "december",
}
_REASONING = {"why", "how", "compare", "should"}


def classify_intent(query: str) -> QueryIntent:
    """First matching rule wins: multi-hop, temporal, reasoning, else fact."""
    if not query or not query.strip():
        raise EmptyQuery()
    tokens = words(query)
    clauses = sum(1 for t in tokens if t in _INTERROGATIVES)
    if clauses >= 2 or query.count("?") >= 2 or _CHAINS.search(query):
        return QueryIntent.MULTIHOP
    token_set = set(tokens)
    if token_set & _TEMPORAL:
        return QueryIntent.TEMPORAL
    if token_set & _REASONING:
        return QueryIntent.REASONING
    return QueryIntent.FACT


def decompose_query(query: str, decomposer: Decomposer, intent: QueryIntent | None = None) -> list[str]:
    if not query or not query.strip():
        raise EmptyQuery()
    if (intent or classify_intent(query)) is not QueryIntent.MULTIHOP:
        return [query]
    try:
        parts = [p for p in decomposer.decompose(query) if p and p.strip()]
    except AdapterError as exc:
        logger.warning("decomposer unavailable, using the whole query: %s", exc)
        return [query]
    if len(parts) < 2:
        logger.warning("decomposer returned %d sub-queries for a multi-hop query; using the whole query", len(parts))
        return [query]
    return parts


def auction_score(sim: float, r: float, u: float, params: ScoringParams) -> float:
    """``max(sim, 0) * r**lam * (1 + beta * u)``."""
    if not -1.0 - 1e-9 <= sim <= 1.0 + 1e-9:
        raise DomainError(f"similarity must lie in [-1, 1], got {sim!r}")
    if not 0.0 < r <= 1.0:
        raise DomainError(f"retrievability must lie in (0, 1], got {r!r}")
    if not 0.0 <= u <= 1.0:
        raise DomainError(f"utility must lie in [0, 1], got {u!r}")
    if params.lam < 0 or params.beta < 0:
        raise DomainError("lambda and beta must be non-negative")
    return max(sim, 0.0) * r ** params.lam * (1.0 + params.beta * u)


Candidate = tuple[MemoryId, float]


def veto_gate(
    query: str,
    candidates: Sequence[Candidate],
    entailer: Entailer,
    content_of: Callable[[MemoryId], str],
    threshold: float = 0.1,
) -> list[Candidate]:
    """Drop candidates whose entailment is strictly below ``threshold``.

    Fails open: if the entailer is unavailable every candidate survives.
    """
    if not 0.0 <= threshold <= 1.0:
        raise DomainError("gate threshold must lie in [0, 1]")
    try:
        scores = [entailer.entailment(query, content_of(mid)) for mid, _ in candidates]
    except AdapterError as exc:
        logger.warning("entailment gate unavailable, admitting all candidates: %s", exc)
        return list(candidates)
    return [c for c, e in zip(candidates, scores) if not e < threshold]


def record_co_retrieval(graph: CoOccurrenceGraph, ids: Sequence[MemoryId]) -> CoOccurrenceGraph:
    if not ids:
        raise ValueError("need at least one id")
    graph.record(ids)
    return graph


def hebbian_expand(
    graph: CoOccurrenceGraph,
    selected: Sequence[MemoryId],
    store: MemoryStore,
    threshold: float = 0.7,
) -> list[MemoryId]:
    """Memories pulled in one hop by strong co-retrieval, in selection order."""
    chosen = set(selected)
    pulled: list[MemoryId] = []
    for a in selected:
        if graph.count(a) == 0:
            continue
        for b in graph.neighbours(a):
            if b in chosen or graph.conditional(b, given=a) <= threshold:
                continue
            record = store.records.get(b)
            if record is None or not record.retrievable:
                continue
            chosen.add(b)
            pulled.append(b)
    return pulled


@dataclass(frozen=True)
class BudgetPlan:
    total_window: int
    generation_reserve: int
    context_allowance: int
    mode: str  # "reasoning" | "recall"
    avg_score: float

    def to_dict(self) -> dict:
        return {
            "total_window": self.total_window,
            "generation_reserve": self.generation_reserve,
            "context_allowance": self.context_allowance,
            "mode": self.mode,
            "avg_score": self.avg_score,
        }


def allocate_budget(scores: Sequence[float], total_window: int, config: GovernanceConfig | None = None) -> BudgetPlan:
    """Reserve a generation budget based on the mean of the top-5 scores.

    ``scores`` must already be sorted best-first. An empty set averages to 0.
    """
    cfg = config or GovernanceConfig()
    if total_window <= cfg.budget_reasoning_reserve:
        raise WindowTooSmall(total_window, cfg.budget_reasoning_reserve)
    top = list(scores)[:5]
    avg = fmean(top) if top else 0.0
    reasoning = avg > cfg.budget_avg_gate
    if cfg.budget_reserve_mode == "percent":
        fraction = cfg.budget_reasoning_fraction if reasoning else cfg.budget_recall_fraction
        reserve = int(round(total_window * fraction))
    else:
        reserve = cfg.budget_reasoning_reserve if reasoning else cfg.budget_recall_reserve
    return BudgetPlan(total_window, reserve, total_window - reserve, "reasoning" if reasoning else "recall", avg)


@dataclass(frozen=True)
class Admitted:
    memory_id: MemoryId
    score: float
    via: str  # "auction" | "hebbian"
    content: str
    tokens: int


@dataclass
class ContextBundle:
    query: str
    intent: QueryIntent
    sub_queries: list[str]
    admitted: list[Admitted]
    budget: BudgetPlan
    gate_drops: int = 0
    hebbian_pulls: int = 0
    truncated: int = 0

    @property
    def ids(self) -> list[MemoryId]:
        return [a.memory_id for a in self.admitted]

    def to_dict(self) -> dict:
        return {
            "query": self.query,
            "intent": self.intent.value,
            "sub_queries": self.sub_queries,
            "admitted": [
                {"id": a.memory_id, "score": a.score, "via": a.via, "content": a.content, "tokens": a.tokens}
                for a in self.admitted
            ],
            "budget": self.budget.to_dict(),
            "counters": {"gate_drops": self.gate_drops, "hebbian_pulls": self.hebbian_pulls,
                         "truncated": self.truncated},
        }


def retrieve_context(
    query: str,
    store: MemoryStore,
    graph: CoOccurrenceGraph,
    adapters: AdapterSuite,
    config: GovernanceConfig,
    now: float,
    intent: QueryIntent | None = None,
    tokenizer: Callable[[str], int] | None = None,
) -> ContextBundle:
    if not query or not query.strip():
        raise EmptyQuery()
    count_tokens = tokenizer or (lambda text: estimate_tokens(text, config.token_factor))
    intent = intent or classify_intent(query)
    params = scoring_params(intent, config)
    sub_queries = decompose_query(query, adapters.decomposer, intent)

    # candidate union: best score per memory across sub-queries
    best: dict[MemoryId, float] = {}
    for sub in sub_queries:
        for memory_id, sim in store.nearest_neighbors(adapters.embedder.embed(sub), config.fanout):
            record = store.records[memory_id]
            if not record.retrievable:
                continue
            r = current_r(record, now, config.fsrs_factor)
            score = auction_score(sim, r, record.utility.trust, params)
            if score > 0 and score > best.get(memory_id, 0.0):
                best[memory_id] = score
    ranked = sorted(best.items(), key=lambda item: (-item[1], item[0]))

    def content_of(mid: MemoryId) -> str:
        return store.records[mid].content

    survivors = veto_gate(query, ranked, adapters.entailer, content_of, config.gate_threshold)
    gate_drops = len(ranked) - len(survivors)

    pulled = hebbian_expand(graph, [mid for mid, _ in survivors], store, config.hebbian_threshold)
    # expanded entries carry their association strength P(b|a) as score
    survivor_ids = [mid for mid, _ in survivors]
    expanded = [(b, max(graph.conditional(b, given=a) for a in survivor_ids)) for b in pulled]
    if config.hebbian_gate_expanded and expanded:
        expanded = veto_gate(query, expanded, adapters.entailer, content_of, config.gate_threshold)

    budget = allocate_budget([s for _, s in survivors], config.budget_total_window, config)

    admitted: list[Admitted] = []
    used = 0
    truncated = 0
    for (mid, score), via in [(c, "auction") for c in survivors] + [(c, "hebbian") for c in expanded]:
        content = content_of(mid)
        tokens = count_tokens(content)
        if used + tokens > budget.context_allowance:
            truncated = len(survivors) + len(expanded) - len(admitted)
            break
        used += tokens
        admitted.append(Admitted(mid, score, via, content, tokens))

    if admitted:
        with store.writer:
            record_co_retrieval(graph, [a.memory_id for a in admitted])
    return ContextBundle(
        query=query,
        intent=intent,
        sub_queries=sub_queries,
        admitted=admitted,
        budget=budget,
        gate_drops=gate_drops,
        hebbian_pulls=sum(1 for a in admitted if a.via == "hebbian"),
        truncated=truncated,
    )

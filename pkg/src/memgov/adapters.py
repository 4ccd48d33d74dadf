"""Boundary to anything model-shaped.

Five roles: embedder, entailer, summarizer, decomposer and guard. Each has a
deterministic mock (pure function of its input) and a remote client speaking
a small JSON protocol. Callers own degradation when a role raises
``AdapterUnavailable``: the veto gate fails open, the guard fails closed, the
decomposer passes the query through and maintenance aborts.
"""

from __future__ import annotations

import hashlib
import logging
import re
import threading
import time
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Protocol, Sequence

import httpx
import numpy as np

from .errors import AdapterUnavailable, EmptyText, MalformedResponse
from .text import content_words, words

if TYPE_CHECKING:
    from .config import GovernanceConfig

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "v1"


class Embedder(Protocol):
    dim: int

    def embed(self, text: str) -> np.ndarray: ...


class Entailer(Protocol):
    def entailment(self, query: str, memory: str) -> float: ...


class Summarizer(Protocol):
    def summarize(self, memories: Sequence[str]) -> str: ...


class Decomposer(Protocol):
    def decompose(self, query: str) -> list[str]: ...


class Guard(Protocol):
    def check(self, content: str) -> str | None:
        """Return a rejection reason, or None to admit."""
        ...


# ---------------------------------------------------------------------------
# Mocks
# ---------------------------------------------------------------------------


def _stable_hash(token: str) -> int:
    return int.from_bytes(hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest(), "little")


@dataclass(frozen=True)
class MockEmbedder:
    """Signed feature hashing of content words, L2-normalized."""

    dim: int = 512

    def embed(self, text: str) -> np.ndarray:
        if not text or not text.strip():
            raise EmptyText()
        tokens = content_words(text) or words(text)
        vec = np.zeros(self.dim, dtype=np.float64)
        for tok in tokens:
            h = _stable_hash(tok)
            sign = 1.0 if (h >> 63) & 1 == 0 else -1.0
            vec[h % self.dim] += sign
        norm = float(np.linalg.norm(vec))
        if norm > 0:
            vec /= norm
        return vec


class MockEntailer:
    """Fraction of the query's content words present in the memory."""

    def entailment(self, query: str, memory: str) -> float:
        q = set(content_words(query))
        if not q:
            return 0.0
        return len(q & set(content_words(memory))) / len(q)


_SENTENCE_SPLIT = re.compile(r"(?<=[.!?;])\s+")


class MockSummarizer:
    def summarize(self, memories: Sequence[str]) -> str:
        if not memories:
            raise EmptyText()
        seen: dict[str, None] = {}
        for memory in memories:
            for sentence in _SENTENCE_SPLIT.split(memory.strip()):
                sentence = sentence.strip().rstrip(";").strip()
                if sentence and sentence not in seen:
                    seen[sentence] = None
        return "CONSOLIDATED: " + "; ".join(seen)


_CLAUSE_SPLIT = re.compile(r"\s*(?:\?|\band then\b|\band\b(?=\s+(?:what|where|who|when|which|why|how)\b))\s*", re.I)
_IMPLIED_LEAD = re.compile(r"^(?:what|which)\s+(?:is|are|was|were)\s+(?:the\s+)?", re.I)


class MockDecomposer:
    """Splits on question marks and clause-chaining conjunctions.

    A leading "what is the" on a clause is dropped, so
    "Where is Tokyo and what is the capital of that country?" becomes
    ["Where is Tokyo?", "Capital of that country?"].
    """

    def decompose(self, query: str) -> list[str]:
        parts = []
        for i, clause in enumerate(p for p in _CLAUSE_SPLIT.split(query) if p and p.strip()):
            clause = clause.strip().rstrip("?.!").strip()
            if i > 0:
                clause = _IMPLIED_LEAD.sub("", clause)
            if clause:
                parts.append(clause[0].upper() + clause[1:] + "?")
        return parts or [query]


DEFAULT_DENY_PATTERNS: tuple[str, ...] = (
    r"ignore (?:all |any )?(?:the )?(?:previous|prior|above) (?:instructions|prompts?|rules)",
    r"disregard (?:all |any )?(?:the )?(?:previous|prior|above|your) (?:instructions|prompts?|rules)",
    r"forget (?:all |everything )?(?:your|previous|prior) instructions",
    r"you are now (?:in )?(?:developer|dan|jailbreak) mode",
    r"reveal (?:your|the) system prompt",
    r"<\s*/?\s*system\s*>",
    r"\bbegin (?:new )?system prompt\b",
    r"override (?:your|the) (?:safety|guard ?rails|policies)",
)


@dataclass
class DenyListGuard:
    """Regex deny-list for prompt-injection markers."""

    patterns: Sequence[str] = DEFAULT_DENY_PATTERNS
    _compiled: list[re.Pattern[str]] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._compiled = [re.compile(p, re.I) for p in self.patterns]

    def check(self, content: str) -> str | None:
        for pattern in self._compiled:
            if pattern.search(content):
                return f"prompt-injection marker: {pattern.pattern}"
        return None


# ---------------------------------------------------------------------------
# Remote clients
# ---------------------------------------------------------------------------


@dataclass
class RemoteClient:
    """JSON-over-HTTP client: ``{schema, role, inputs, params}`` -> ``{outputs, model_id}``."""

    endpoint: str
    timeout: float = 10.0
    retries: int = 2
    backoff: float = 0.5
    max_in_flight: int = 4
    transport: httpx.BaseTransport | None = None
    _slots: threading.BoundedSemaphore = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._slots = threading.BoundedSemaphore(self.max_in_flight)

    def call(self, role: str, inputs: list[Any], params: dict[str, Any] | None = None) -> list[Any]:
        request = {"schema": SCHEMA_VERSION, "role": role, "inputs": inputs, "params": params or {}}
        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                with self._slots, httpx.Client(timeout=self.timeout, transport=self.transport) as client:
                    response = client.post(self.endpoint, json=request)
                if response.status_code >= 500:
                    last_error = AdapterUnavailable(f"{role}: HTTP {response.status_code}")
                    continue
                response.raise_for_status()
                body = response.json()
            except httpx.HTTPStatusError as exc:
                raise MalformedResponse(f"{role}: HTTP {exc.response.status_code}") from exc
            except (httpx.TransportError, OSError) as exc:
                last_error = exc
                continue
            except ValueError as exc:
                raise MalformedResponse(f"{role}: response is not JSON") from exc
            outputs = body.get("outputs") if isinstance(body, dict) else None
            if not isinstance(outputs, list):
                raise MalformedResponse(f"{role}: response lacks an outputs list")
            return outputs
        raise AdapterUnavailable(
            f"{role} adapter at {self.endpoint} unavailable after {self.retries + 1} attempts: {last_error}"
        )


@dataclass
class RemoteEmbedder:
    client: RemoteClient
    dim: int = 512

    def embed(self, text: str) -> np.ndarray:
        if not text or not text.strip():
            raise EmptyText()
        (vector,) = _exactly(self.client.call("embedder", [text]), 1, "embedder")
        try:
            vec = np.asarray(vector, dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise MalformedResponse("embedder returned a non-numeric vector") from exc
        if vec.shape != (self.dim,):
            raise MalformedResponse(f"embedder returned shape {vec.shape}, expected ({self.dim},)")
        norm = float(np.linalg.norm(vec))
        return vec / norm if norm > 0 else vec


@dataclass
class RemoteEntailer:
    client: RemoteClient

    def entailment(self, query: str, memory: str) -> float:
        (score,) = _exactly(self.client.call("entailer", [query, memory]), 1, "entailer")
        if isinstance(score, bool) or not isinstance(score, (int, float)):
            raise MalformedResponse("entailer returned a non-numeric score")
        return float(score)


@dataclass
class RemoteSummarizer:
    client: RemoteClient

    def summarize(self, memories: Sequence[str]) -> str:
        (text,) = _exactly(self.client.call("summarizer", list(memories)), 1, "summarizer")
        if not isinstance(text, str) or not text.strip():
            raise MalformedResponse("summarizer returned empty text")
        return text


@dataclass
class RemoteDecomposer:
    client: RemoteClient

    def decompose(self, query: str) -> list[str]:
        outputs = self.client.call("decomposer", [query])
        if not outputs or not all(isinstance(o, str) and o.strip() for o in outputs):
            raise MalformedResponse("decomposer returned no sub-queries")
        return list(outputs)


@dataclass
class RemoteGuard:
    client: RemoteClient

    def check(self, content: str) -> str | None:
        (verdict,) = _exactly(self.client.call("guard", [content]), 1, "guard")
        if verdict is None:
            return None
        if not isinstance(verdict, str):
            raise MalformedResponse("guard verdict must be null or a reason string")
        return verdict


def _exactly(outputs: list[Any], n: int, role: str) -> list[Any]:
    if len(outputs) != n:
        raise MalformedResponse(f"{role} returned {len(outputs)} outputs, expected {n}")
    return outputs


@dataclass
class AdapterSuite:
    embedder: Embedder
    entailer: Entailer
    summarizer: Summarizer
    decomposer: Decomposer
    guard: Guard

    @classmethod
    def mock(cls, dim: int = 512) -> AdapterSuite:
        return cls(
            embedder=MockEmbedder(dim),
            entailer=MockEntailer(),
            summarizer=MockSummarizer(),
            decomposer=MockDecomposer(),
            guard=DenyListGuard(),
        )

    @classmethod
    def remote(cls, endpoint: str, dim: int = 512, **client_options: Any) -> AdapterSuite:
        """Every role served by one endpoint, dispatched on the request's ``role`` field."""
        client = RemoteClient(endpoint, **client_options)
        return cls(
            embedder=RemoteEmbedder(client, dim),
            entailer=RemoteEntailer(client),
            summarizer=RemoteSummarizer(client),
            decomposer=RemoteDecomposer(client),
            guard=RemoteGuard(client),
        )

    @classmethod
    def from_config(cls, config: GovernanceConfig, endpoint: str | None = None) -> AdapterSuite:
        """Remote adapters tuned by the ``adapter.*`` keys when an endpoint is given, else the mocks."""
        if not endpoint:
            return cls.mock(config.embedding_dim)
        return cls.remote(
            endpoint,
            config.embedding_dim,
            timeout=config.adapter_timeout,
            retries=config.adapter_retries,
            backoff=config.adapter_backoff,
            max_in_flight=config.adapter_max_in_flight,
        )

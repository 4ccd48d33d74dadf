"""Tokenization shared by usage detection, the mock embedder and the mock entailer."""

from __future__ import annotations

import math
import re

_WORD = re.compile(r"[a-z0-9]+(?:'[a-z0-9]+)*")

# Pinned list: changing it changes usage detection and mock embeddings.
STOPWORDS: frozenset[str] = frozenset("""
a about above after again against all am an and any are as at be because been
before being below between both but by can could did do does doing down during
each few for from further had has have having he her here hers herself him himself
his how i if in into is it its itself just me more most my myself no nor not now
of off on once only or other our ours ourselves out over own same she should so
some such than that the their theirs them themselves then there these they this
those through to too under until up very was we were what when where which while
who whom why will with would you your yours yourself yourselves
""".split())


def words(text: str) -> list[str]:
    """Lowercased word tokens with punctuation stripped."""
    return _WORD.findall(text.lower())


def content_words(text: str) -> list[str]:
    return [w for w in words(text) if w not in STOPWORDS]


def estimate_tokens(text: str, factor: float = 1.3) -> int:
    """Whitespace-token count scaled by a safety factor, rounded up."""
    return math.ceil(len(text.split()) * factor)

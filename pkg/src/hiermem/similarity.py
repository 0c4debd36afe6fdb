"""Vector and keyword-set similarity primitives."""

from __future__ import annotations

import math
from typing import AbstractSet, Sequence

from .errors import InvalidArgumentError

__all__ = ["cosine", "jaccard"]


def cosine(a: Sequence[float], b: Sequence[float]) -> float:
    """Cosine similarity; zero vectors score 0.0 by convention."""
    if len(a) != len(b):
        raise InvalidArgumentError(f"embedding dimensions differ: {len(a)} vs {len(b)}")
    dot = 0.0
    norm_a = 0.0
    norm_b = 0.0
    for x, y in zip(a, b):
        dot += x * y
        norm_a += x * x
        norm_b += y * y
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    return dot / (math.sqrt(norm_a) * math.sqrt(norm_b))


def jaccard(a: AbstractSet[str], b: AbstractSet[str]) -> float:
    """Set overlap |a & b| / |a | b|; two empty sets score 0.0."""
    if not a and not b:
        return 0.0
    return len(a & b) / len(a | b)

# llm/embeddings.py
"""
Embedding vectors, cosine similarity and the offline lexical embedder.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple

import numpy as np

from core.errors import DimensionMismatch, EmptyBatch, ZeroVector

LEXICAL_BUCKETS = 512


@dataclass(frozen=True)
class EmbeddingVector:
    components: Tuple[float, ...]

    @property
    def dimension(self) -> int:
        return len(self.components)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.components, dtype=np.float64)

    def is_zero(self) -> bool:
        return not any(self.components)


# texts in, one vector per text out (same order)
Embedder = Callable[[List[str]], List[EmbeddingVector]]


def cosine(u: EmbeddingVector, v: EmbeddingVector) -> float:
    """
    Cosine similarity clamped to [-1, 1].

    One zero vector gives 0.0; two zero vectors raise ZeroVector.
    """
    if u.dimension != v.dimension:
        raise DimensionMismatch(f"{u.dimension} != {v.dimension}")
    a, b = u.as_array(), v.as_array()
    na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    if na == 0.0 and nb == 0.0:
        raise ZeroVector("cosine of two zero vectors is undefined")
    if na == 0.0 or nb == 0.0:
        return 0.0
    if np.array_equal(a, b):
        return 1.0
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


# ───────────────────────── lexical embedder ──────────────────────────
def _bucket(gram: str, buckets: int) -> int:
    digest = hashlib.md5(gram.encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "big") % buckets


def lexical_embed(text: str, buckets: int = LEXICAL_BUCKETS) -> EmbeddingVector:
    """
    L2-normalised hashed character 3-gram frequencies.

    Non-empty texts shorter than three characters are padded with a space
    on each side so they still yield a 3-gram; only "" embeds to zero.
    """
    counts = np.zeros(buckets, dtype=np.float64)
    lowered = text.lower()
    if 0 < len(lowered) < 3:
        lowered = f" {lowered} "
    for i in range(len(lowered) - 2):
        counts[_bucket(lowered[i:i + 3], buckets)] += 1.0
    norm = np.linalg.norm(counts)
    if norm > 0:
        counts /= norm
    return EmbeddingVector(tuple(float(x) for x in counts))


def lexical_embedder(texts: Sequence[str]) -> List[EmbeddingVector]:
    if not texts:
        raise EmptyBatch("no texts to embed")
    return [lexical_embed(t) for t in texts]

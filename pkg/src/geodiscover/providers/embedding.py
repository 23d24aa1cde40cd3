"""Deterministic text embeddings.

The default provider hashes tokens into a fixed number of signed buckets, so
identical text always maps to the identical unit vector without any model
weights or network access. Cosine similarity then reflects token overlap,
which is enough for the retrieval thresholds to be exercised honestly.
"""
from __future__ import annotations

import hashlib
import re
from typing import Protocol

import numpy as np

DEFAULT_DIMENSION = 256

_TOKEN_SPLIT = re.compile(r"[^0-9a-z]+")


def tokenize(text: str) -> list[str]:
    return [t for t in _TOKEN_SPLIT.split(text.casefold()) if t]


class EmbeddingProvider(Protocol):
    @property
    def dimension(self) -> int: ...

    def embed(self, text: str) -> np.ndarray: ...


class HashingEmbedder:
    """Feature-hashing embedder: sha256 picks each token's bucket and sign."""

    def __init__(self, dimension: int = DEFAULT_DIMENSION):
        if dimension < 2:
            raise ValueError(f"dimension must be at least 2, got {dimension}")
        self._dimension = dimension

    @property
    def dimension(self) -> int:
        return self._dimension

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self._dimension, dtype=np.float32)
        tokens = tokenize(text)
        if not tokens:
            # Empty text still needs a valid unit vector; use the first basis vector.
            vec[0] = 1.0
            return vec
        for token in tokens:
            digest = hashlib.sha256(token.encode("utf-8")).digest()
            bucket = int.from_bytes(digest[:8], "little") % self._dimension
            sign = 1.0 if digest[8] % 2 == 0 else -1.0
            vec[bucket] += sign
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            # Token signs can cancel exactly; fall back to the basis vector.
            vec[:] = 0.0
            vec[0] = 1.0
            return vec
        return vec / norm


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity for unit-normalized vectors."""
    return float(np.dot(a, b))

# backend/app/linguistics/embeddings.py

from __future__ import annotations

import hashlib
from typing import Optional, Protocol, Sequence

import numpy as np

STUB_DIMENSION = 384


class Embedder(Protocol):
    async def embed(self, texts: Sequence[str]) -> np.ndarray:
        """Unit-norm row per text."""
        ...


class StubEmbedder:
    """
    Deterministic bag-of-tokens embedder: each lowercased token is hashed
    (blake2b) to one coordinate, counts are accumulated and the vector is
    L2-normalized. Text without tokens maps to the first basis vector.
    """

    def __init__(self, dimension: int = STUB_DIMENSION) -> None:
        self.dimension = dimension

    def _index(self, token: str) -> int:
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "big") % self.dimension

    def embed_one(self, text: str) -> np.ndarray:
        v = np.zeros(self.dimension)
        for token in text.lower().split():
            v[self._index(token)] += 1.0
        norm = np.linalg.norm(v)
        if norm == 0:
            v[0] = 1.0
            return v
        return v / norm

    def embed_sync(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            return np.zeros((0, self.dimension))
        return np.vstack([self.embed_one(t) for t in texts])

    async def embed(self, texts: Sequence[str]) -> np.ndarray:
        return self.embed_sync(texts)


def centroid(vectors: np.ndarray) -> np.ndarray:
    """Mean of the rows, renormalized (zero mean stays zero)."""
    c = np.asarray(vectors, dtype=float).mean(axis=0)
    norm = np.linalg.norm(c)
    return c if norm == 0 else c / norm


def info_difference(current: np.ndarray, previous: Optional[np.ndarray]) -> Optional[float]:
    """
    Mean cosine distance (1 - cos) of this round's message embeddings to the
    previous round's centroid. None when there is no previous round.
    """
    if previous is None or len(previous) == 0:
        return None
    current = np.asarray(current, dtype=float)
    if len(current) == 0:
        return None

    c = centroid(previous)
    norms = np.linalg.norm(current, axis=1)
    safe = np.where(norms == 0, 1.0, norms)
    cosines = (current @ c) / safe
    # zero vectors (or a cancelled-out centroid) are orthogonal to everything
    cosines = np.where(norms == 0, 0.0, np.clip(cosines, -1.0, 1.0))
    return float(np.mean(1.0 - cosines))

"""Exact cosine-similarity search with score threshold and top-k.

A deliberate brute-force design: vectors are unit-normalized at build time so
cosine reduces to a dot product, the whole index is one dense float64 matrix,
and searches scan it. For thresholded searches over large indexes a
Cauchy-Schwarz block bound prunes rows that cannot reach the threshold, which
roughly halves the scan cost without giving up exactness (scores differ from
the plain scan only by float addition order).

Snapshots are immutable; rebuild and swap to update.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .model import EmbeddingVector

# Pruned path pays off only when the bound can reject most rows and the
# index is large enough for the gather overhead to be amortized.
_PRUNE_MIN_ROWS = 4096
_PRUNE_MIN_THRESHOLD = 0.3

_ZERO_NORM_EPS = 1e-12


class ZeroVectorError(ValueError):
    """A vector with (near-)zero norm cannot participate in cosine scoring."""


class DimensionMismatch(ValueError):
    """Vector length disagrees with the index dimension."""


@dataclass(frozen=True)
class IndexEntry:
    key: str
    vector: EmbeddingVector


@dataclass(frozen=True)
class Match:
    key: str
    score: float


def cosine(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Cosine similarity of two vectors, in [-1, 1]."""
    if a.dimension != b.dimension:
        raise DimensionMismatch(
            f"vector lengths differ: {a.dimension} vs {b.dimension}"
        )
    va, vb = a.values, b.values
    norm_a = float(np.linalg.norm(va))
    norm_b = float(np.linalg.norm(vb))
    if norm_a < _ZERO_NORM_EPS or norm_b < _ZERO_NORM_EPS:
        raise ZeroVectorError("cosine is undefined for zero vectors")
    return float(np.clip(float(np.dot(va, vb)) / (norm_a * norm_b), -1.0, 1.0))


class VectorIndex:
    """Immutable snapshot of keyed vectors, searchable by cosine similarity."""

    def __init__(self, keys: Sequence[str], matrix: np.ndarray):
        # Internal constructor; use build().
        self._keys: tuple[str, ...] = tuple(keys)
        self._matrix = matrix
        n, m = matrix.shape
        self._dimension = m
        split = m // 2
        self._split = split
        self._head = matrix[:, :split] if n else matrix
        self._tail = matrix[:, split:] if n else matrix
        self._tail_norms = (
            np.linalg.norm(self._tail, axis=1) if n else np.zeros(0)
        )

    @property
    def dimension(self) -> int:
        return self._dimension

    def __len__(self) -> int:
        return len(self._keys)

    def __contains__(self, key: str) -> bool:
        return key in set(self._keys)

    @property
    def keys(self) -> tuple[str, ...]:
        return self._keys

    def entries(self) -> list[IndexEntry]:
        return [
            IndexEntry(key=key, vector=EmbeddingVector(self._matrix[i]))
            for i, key in enumerate(self._keys)
        ]

    def search(
        self, query: EmbeddingVector, threshold: float, top_k: int
    ) -> list[Match]:
        """Matches with score >= threshold, best first, at most top_k.

        Ordering is total: non-increasing score, ties broken by ascending
        key. Repeated searches on a snapshot return identical lists.
        """
        if top_k < 1:
            raise ValueError("top_k must be >= 1")
        if query.dimension != self._dimension:
            raise DimensionMismatch(
                f"query has {query.dimension} dimensions, index has "
                f"{self._dimension}"
            )
        if not self._keys:
            return []
        q = query.values
        q_norm = float(np.linalg.norm(q))
        if q_norm < _ZERO_NORM_EPS:
            raise ZeroVectorError("cannot search with a zero query vector")
        q = q / q_norm

        if len(self._keys) >= _PRUNE_MIN_ROWS and threshold >= _PRUNE_MIN_THRESHOLD:
            candidates, scores = self._scan_pruned(q, threshold)
        else:
            candidates, scores = self._scan_full(q, threshold)
        if candidates.size == 0:
            return []

        # Keys were sorted ascending at build time, so a stable sort on
        # descending score yields the (score desc, key asc) total order.
        order = np.argsort(-scores, kind="stable")[:top_k]
        return [
            Match(key=self._keys[candidates[i]], score=float(scores[i]))
            for i in order
        ]

    def _scan_full(
        self, q: np.ndarray, threshold: float
    ) -> tuple[np.ndarray, np.ndarray]:
        scores = np.clip(self._matrix @ q, -1.0, 1.0)
        candidates = np.flatnonzero(scores >= threshold)
        return candidates, scores[candidates]

    def _scan_pruned(
        self, q: np.ndarray, threshold: float
    ) -> tuple[np.ndarray, np.ndarray]:
        # score_i = head_i . q_head + tail_i . q_tail
        #         <= head_i . q_head + |tail_i| * |q_tail|   (Cauchy-Schwarz)
        # Rows whose bound misses the threshold cannot match.
        q_head, q_tail = q[: self._split], q[self._split:]
        partial = self._head @ q_head
        bound = partial + self._tail_norms * float(np.linalg.norm(q_tail))
        survivors = np.flatnonzero(bound >= threshold)
        if survivors.size == 0:
            return survivors, np.zeros(0)
        scores = np.clip(self._matrix[survivors] @ q, -1.0, 1.0)
        keep = scores >= threshold
        return survivors[keep], scores[keep]


def build(
    entries: Iterable[IndexEntry], *, dimension: int | None = None
) -> VectorIndex:
    """Build an immutable index snapshot; duplicate keys are an error.

    ``dimension`` is required when ``entries`` is empty and must match the
    vectors otherwise. Vectors are unit-normalized on insert; zero vectors
    are rejected so degenerate embeddings surface at build time.
    """
    ordered = sorted(entries, key=lambda e: e.key)
    if not ordered:
        if dimension is None:
            raise ValueError("dimension is required to build an empty index")
        return VectorIndex((), np.zeros((0, dimension), dtype=np.float64))

    seen: set[str] = set()
    for entry in ordered:
        if entry.key in seen:
            raise ValueError(f"duplicate index key: {entry.key}")
        seen.add(entry.key)

    m = ordered[0].vector.dimension
    if dimension is not None and dimension != m:
        raise DimensionMismatch(
            f"entries have {m} dimensions, expected {dimension}"
        )
    matrix = np.empty((len(ordered), m), dtype=np.float64)
    for i, entry in enumerate(ordered):
        if entry.vector.dimension != m:
            raise DimensionMismatch(
                f"entry {entry.key} has {entry.vector.dimension} dimensions, "
                f"index has {m}"
            )
        matrix[i] = entry.vector.values
    norms = np.linalg.norm(matrix, axis=1)
    degenerate = np.flatnonzero(norms < _ZERO_NORM_EPS)
    if degenerate.size:
        raise ZeroVectorError(
            f"zero vector for key {ordered[int(degenerate[0])].key}; "
            "skip degenerate embeddings before indexing"
        )
    matrix /= norms[:, None]
    return VectorIndex([e.key for e in ordered], matrix)

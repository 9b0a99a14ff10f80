"""Enumeration and indexing of the auxiliary-operator hierarchy.

An auxiliary operator is labelled by two length-K vectors of non-negative
integers (m, n); the hierarchy keeps every label with depth
sum(m) + sum(n) <= N_max.  Internally the two vectors are concatenated
into one length-2K vector.  Labels are enumerated in graded
lexicographic order (by depth, then lexicographic), which puts the
reduced density operator at row 0 and makes the layout deterministic.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from math import comb

import numpy as np

from .errors import TopologySizeError

__all__ = ["HierarchyTopology", "build_topology", "hierarchy_size"]


def hierarchy_size(K: int, N_max: int) -> int:
    """Number of length-2K non-negative integer vectors with sum <= N_max."""
    return comb(2 * K + N_max, N_max)


def _composition_block(length: int, total: int, cache: dict) -> np.ndarray:
    """All non-negative integer vectors of given length summing to total,
    lexicographic order, as an int8 array (memoised on (length, total))."""
    key = (length, total)
    if key in cache:
        return cache[key]
    if length == 1:
        out = np.array([[total]], dtype=np.int8)
    else:
        blocks = []
        for first in range(total + 1):
            rest = _composition_block(length - 1, total - first, cache)
            col = np.full((rest.shape[0], 1), first, dtype=np.int8)
            blocks.append(np.hstack((col, rest)))
        out = np.vstack(blocks)
    cache[key] = out
    return out


@dataclass
class HierarchyTopology:
    """Complete enumeration of the truncated hierarchy with neighbor maps.

    Attributes
    ----------
    vectors : int8 array (count, 2K)
        Concatenated (m, n) label of each row, graded-lex order.
    depth : int16 array (count,)
        sum of each label.
    up, down : int32 arrays (count, 2K)
        Row index reached by raising/lowering slot k, or -1 when the
        neighbor is outside the truncated hierarchy.
    """

    K: int
    N_max: int
    vectors: np.ndarray
    depth: np.ndarray
    up: np.ndarray
    down: np.ndarray

    @property
    def count(self) -> int:
        return self.vectors.shape[0]

    @property
    def hash(self) -> str:
        h = hashlib.sha256()
        h.update(f"hierarchy-v1:{self.K}:{self.N_max}:".encode())
        h.update(self.vectors.tobytes())
        return h.hexdigest()[:16]

    def index_of(self, m, n) -> int:
        """Row of the label (m, n); raises KeyError if outside the hierarchy."""
        key = np.concatenate((m, n)).astype(np.int8).tobytes()
        try:
            return self._rank[key]
        except AttributeError:
            object.__setattr__(
                self,
                "_rank",
                {v.tobytes(): i for i, v in enumerate(self.vectors)},
            )
            return self._rank[key]

    def label(self, row: int):
        """(m, n) pair of a row."""
        v = self.vectors[row]
        return v[: self.K].copy(), v[self.K:].copy()


def build_topology(K: int, N_max: int, *, max_count: int = 2_000_000) -> HierarchyTopology:
    """Enumerate the truncated hierarchy and its raise/lower neighbor maps.

    Deterministic graded-lex order; the stars-and-bars count is asserted.
    Raises TopologySizeError before allocating anything when the hierarchy
    would exceed ``max_count`` rows.
    """
    if K < 1 or N_max < 1:
        raise ValueError("K and N_max must both be >= 1")
    length = 2 * K
    expected = hierarchy_size(K, N_max)
    if expected > max_count:
        raise TopologySizeError(
            f"hierarchy with K={K}, N_max={N_max} has {expected} rows, "
            f"exceeding the budget of {max_count}; raise max_count if this "
            f"is intended"
        )

    cache: dict = {}
    vectors = np.vstack(
        [_composition_block(length, d, cache) for d in range(N_max + 1)]
    )
    cache.clear()
    assert vectors.shape[0] == expected

    depth = vectors.sum(axis=1).astype(np.int16)
    rank = {v.tobytes(): i for i, v in enumerate(vectors)}

    up = np.full((expected, length), -1, dtype=np.int32)
    down = np.full((expected, length), -1, dtype=np.int32)
    inner = np.flatnonzero(depth < N_max)
    for i in inner:
        w = vectors[i].copy()
        row = up[i]
        for k in range(length):
            w[k] += 1
            row[k] = rank[w.tobytes()]
            w[k] -= 1
    # lowering is the inverse of raising: down[up[j, k], k] = j
    for k in range(length):
        down[up[inner, k], k] = inner

    topo = HierarchyTopology(
        K=K, N_max=N_max, vectors=vectors, depth=depth, up=up, down=down
    )
    object.__setattr__(topo, "_rank", rank)
    return topo

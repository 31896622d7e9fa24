"""Coordinate-indexed sparse tensors and hard thresholding."""
from __future__ import annotations

import math
from collections import Counter
from itertools import permutations

import numpy as np

from .errors import ConfigError, SizeError

TINY = 1e-300


def canonical(idx) -> tuple:
    return tuple(sorted(int(i) for i in idx))


def multiplicity(idx) -> int:
    """Number of distinct orderings of an index tuple."""
    n = math.factorial(len(idx))
    for c in Counter(idx).values():
        n //= math.factorial(c)
    return n


class SparseTensor:
    """Order-2 or order-3 tensor stored as ``{index tuple: value}``.

    Values are monomial coefficients: the model evaluated at ``x`` is
    ``sum(v * prod(x[i] for i in idx))`` over stored entries, so ``(i, j)``
    and ``(j, i)`` are two terms of the same monomial. Zeros are never stored.
    """

    __slots__ = ("p", "order", "entries")

    def __init__(self, p: int, order: int = 2, entries=None):
        if order not in (2, 3):
            raise ConfigError(f"order must be 2 or 3, got {order}")
        self.p = int(p)
        self.order = order
        self.entries = {}
        for idx, v in (entries or {}).items():
            idx = tuple(int(i) for i in idx)
            if len(idx) != order:
                raise SizeError(f"index {idx} does not have {order} coordinates")
            if not all(0 <= i < p for i in idx):
                raise SizeError(f"index {idx} out of range for p={p}")
            if abs(v) >= TINY:
                self.entries[idx] = float(v)

    def __len__(self):
        return len(self.entries)

    def __repr__(self):
        return f"SparseTensor(p={self.p}, order={self.order}, nnz={len(self)})"

    def __eq__(self, other):
        return (
            isinstance(other, SparseTensor)
            and (self.p, self.order) == (other.p, other.order)
            and self.entries == other.entries
        )

    def copy(self) -> "SparseTensor":
        return SparseTensor(self.p, self.order, dict(self.entries))

    def support(self) -> set:
        return set(self.entries)

    def arrays(self):
        """``(indices (nnz, order) int array, values (nnz,) array)`` in sorted key order."""
        keys = sorted(self.entries)
        idx = np.array(keys, dtype=np.int64).reshape(len(keys), self.order)
        vals = np.array([self.entries[k] for k in keys], dtype=np.float64)
        return idx, vals

    def dense(self) -> np.ndarray:
        out = np.zeros((self.p,) * self.order)
        for idx, v in self.entries.items():
            out[idx] += v
        return out

    def folded(self) -> "SparseTensor":
        """Merge entries of the same monomial onto the sorted index tuple."""
        acc: dict = {}
        for idx, v in self.entries.items():
            key = canonical(idx)
            acc[key] = acc.get(key, 0.0) + v
        return SparseTensor(self.p, self.order, acc)

    def symmetric_dense(self) -> np.ndarray:
        """Dense symmetric tensor with the same model (test scale only)."""
        out = np.zeros((self.p,) * self.order)
        for idx, v in self.folded().entries.items():
            perms = set(permutations(idx))
            for q in perms:
                out[q] += v / len(perms)
        return out

    def frobenius_distance(self, other: "SparseTensor") -> float:
        """``||self - other||_F`` between the folded coefficient tensors."""
        a = self.folded().entries
        b = other.folded().entries
        return math.sqrt(sum((a.get(k, 0.0) - b.get(k, 0.0)) ** 2 for k in sorted(set(a) | set(b))))

    def norm(self) -> float:
        entries = self.folded().entries
        return math.sqrt(sum(entries[k] ** 2 for k in sorted(entries)))


def _ranked(keys: np.ndarray, values: np.ndarray, k: int) -> np.ndarray:
    # ascending lexicographic key order as the secondary sort, |value| descending first
    cols = [keys[:, c] for c in range(keys.shape[1] - 1, -1, -1)]
    order = np.lexsort(cols + [-np.abs(values)])
    return order[:k]


def top_k_indices(keys, values, k: int) -> list:
    """Tuples of the k largest |values|; ties go to the smaller index."""
    keys = np.asarray(keys, dtype=np.int64)
    values = np.asarray(values, dtype=np.float64)
    if k <= 0 or values.size == 0:
        return []
    keys = keys.reshape(values.size, -1)
    return [tuple(int(i) for i in keys[j]) for j in _ranked(keys, values, k)]


def hard_threshold(M, k: int, p: int | None = None, order: int | None = None) -> SparseTensor:
    """Keep the k entries of largest magnitude (lexicographic tie break).

    ``M`` may be a SparseTensor, a ``{index: value}`` dict or a dense array.
    """
    if k < 0:
        raise ConfigError(f"k must be >= 0, got {k}")
    if isinstance(M, np.ndarray):
        order = M.ndim
        p = M.shape[0]
        keys = np.argwhere(M != 0)
        values = M[tuple(keys.T)] if len(keys) else np.zeros(0)
    else:
        if isinstance(M, SparseTensor):
            p, order, entries = M.p, M.order, M.entries
        else:
            entries = M
            if p is None or order is None:
                raise ConfigError("p and order are required for dict input")
        items = [(kk, v) for kk, v in entries.items() if v != 0]
        keys = np.array([kk for kk, _ in items], dtype=np.int64).reshape(len(items), order)
        values = np.array([v for _, v in items], dtype=np.float64)
    kept = top_k_indices(keys, values, k) if len(values) else []
    lookup = {tuple(int(i) for i in kk): float(v) for kk, v in zip(keys, values)}
    return SparseTensor(p, order, {kk: lookup[kk] for kk in kept})

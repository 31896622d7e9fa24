"""Count-sketch kernel: seeded hashes, sketches, FFT circular convolution.

The compressed product of two factor panels ``A`` (p x m) and ``B`` (p x m)
is the count-sketch of ``A @ B.T`` under the composite hash
``h(i, j) = (h1(i) + h2(j)) mod b`` and sign ``s1(i) * s2(j)``, obtained
without materializing the p x p product.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, SizeError

MERSENNE_61 = (1 << 61) - 1


def next_pow2(n: int) -> int:
    if n < 1:
        raise ConfigError(f"bucket count must be positive, got {n}")
    return 1 << (int(n) - 1).bit_length()


def is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def _poly_hash(idx: np.ndarray, a: int, c: int) -> np.ndarray:
    # python ints: a*i overflows uint64
    return np.array([(a * int(v) + c) % MERSENNE_61 for v in idx], dtype=np.uint64)


@dataclass(frozen=True)
class HashPair:
    """Bucket hash ``h: [p] -> [b]`` and sign hash ``s: [p] -> {-1, +1}``.

    Both are degree-1 polynomials over GF(2^61 - 1) with coefficients drawn
    from ``seed`` through numpy's PCG64, so the maps are identical on every
    platform.
    """

    seed: int
    b: int
    p: int
    h: np.ndarray = field(init=False, repr=False, compare=False)
    s: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.b < 1:
            raise ConfigError(f"bucket count must be positive, got {self.b}")
        if self.p < 1:
            raise ConfigError(f"dimension must be positive, got {self.p}")
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed)))
        a1, c1, a2, c2 = (int(v) for v in rng.integers(0, MERSENNE_61, size=4, dtype=np.uint64))
        a1 = a1 or 1
        a2 = a2 or 1
        idx = np.arange(self.p)
        h = (_poly_hash(idx, a1, c1) % np.uint64(self.b)).astype(np.int64)
        # low bit of an independent polynomial gives the sign
        s = 1.0 - 2.0 * (_poly_hash(idx, a2, c2) & np.uint64(1)).astype(np.float64)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "s", s)

    @classmethod
    def from_maps(cls, h, s, b: int) -> "HashPair":
        """Build a pair with explicit maps (used by tests and oracles)."""
        h = np.asarray(h, dtype=np.int64)
        s = np.asarray(s, dtype=np.float64)
        if h.shape != s.shape:
            raise SizeError("hash and sign maps differ in length")
        if np.any((h < 0) | (h >= b)):
            raise ConfigError("bucket map out of range")
        if not np.all(np.abs(s) == 1.0):
            raise ConfigError("sign map must be +/-1")
        obj = cls.__new__(cls)
        object.__setattr__(obj, "seed", -1)
        object.__setattr__(obj, "b", int(b))
        object.__setattr__(obj, "p", int(h.size))
        object.__setattr__(obj, "h", h)
        object.__setattr__(obj, "s", s)
        return obj


def count_sketch(x, hp: HashPair, rows=None) -> np.ndarray:
    """Sketch a length-p vector (or each column of a p x m panel) into b buckets.

    A panel yields an (m, b) array, one sketch per column. ``rows``
    restricts the sum to a subset of coordinates, which is how the
    row-masked panels ``diag(e_r) @ A`` are sketched without building them.
    Buckets accumulate in ascending coordinate order.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != hp.p:
        raise SizeError(f"input has {x.shape[0]} rows, hash expects p={hp.p}")
    h, s = hp.h, hp.s
    if rows is not None:
        x = x[rows]
        h = h[rows]
        s = s[rows]
    if x.ndim == 1:
        return np.bincount(h, weights=s * x, minlength=hp.b)
    if x.ndim != 2:
        raise SizeError("count_sketch takes a vector or a 2-d panel")
    m = x.shape[1]
    # column-major flattening keeps coordinates ascending inside each column
    keys = (h[None, :] + hp.b * np.arange(m)[:, None]).ravel()
    w = (x.T * s[None, :]).ravel()
    return np.bincount(keys, weights=w, minlength=hp.b * m).reshape(m, hp.b)


def _check_b(b: int) -> None:
    if not is_pow2(b):
        raise ConfigError(f"bucket count {b} is not a power of two")


def circular_convolve(u, v) -> np.ndarray:
    """``out[q] = sum_r u[r] * v[(q - r) mod b]`` via real FFTs."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape[-1] != v.shape[-1]:
        raise SizeError(f"length mismatch {u.shape[-1]} vs {v.shape[-1]}")
    b = u.shape[-1]
    _check_b(b)
    return np.fft.irfft(np.fft.rfft(u) * np.fft.rfft(v), n=b)


@dataclass
class GradientFactors:
    """Panels whose product ``A @ B.T / m`` is the batch gradient.

    Column i of ``A`` is ``u_i * x_i`` and column i of ``B`` is ``x_i``. For
    order 3 the gradient tensor is ``sum_i u_i x_i (x) x_i (x) x_i / m`` and
    ``B`` doubles as the second and third panel.
    """

    A: np.ndarray
    B: np.ndarray
    order: int = 2

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=np.float64)
        self.B = np.asarray(self.B, dtype=np.float64)
        if self.A.shape != self.B.shape or self.A.ndim != 2:
            raise SizeError(f"panel shapes differ: {self.A.shape} vs {self.B.shape}")
        if self.order not in (2, 3):
            raise ConfigError(f"order must be 2 or 3, got {self.order}")

    @classmethod
    def from_batch(cls, X, u, order: int = 2) -> "GradientFactors":
        """Build panels from an (m, p) batch of samples and residuals."""
        X = np.asarray(X, dtype=np.float64)
        u = np.asarray(u, dtype=np.float64)
        return cls(A=(X * u[:, None]).T, B=X.T, order=order)

    @property
    def p(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.A.shape[1]

    def dense(self) -> np.ndarray:
        """Materialize the gradient (test scale only)."""
        if self.order == 2:
            return self.A @ self.B.T / self.m
        return np.einsum("im,jm,km->ijk", self.A, self.B, self.B) / self.m

    def frobenius_norm(self) -> float:
        """``||gradient||_F`` from the m x m Gram matrices, O(m^2 p)."""
        ga = self.A.T @ self.A
        gb = self.B.T @ self.B
        sq = np.sum(ga * gb) if self.order == 2 else np.sum(ga * gb * gb)
        return float(np.sqrt(max(sq, 0.0))) / self.m


def _spectra(panel: np.ndarray, hp: HashPair, rows=None) -> np.ndarray:
    return np.fft.rfft(count_sketch(panel, hp, rows), axis=1)


def _spectral_sum(*spectra: np.ndarray) -> np.ndarray:
    prod = spectra[0]
    for sp in spectra[1:]:
        prod = prod * sp
    return prod.sum(axis=0)


def compressed_product(f: GradientFactors, hp1: HashPair, hp2: HashPair) -> np.ndarray:
    """Count-sketch of ``A @ B.T`` (unscaled; divide by m for the gradient)."""
    if hp1.b != hp2.b:
        raise SizeError(f"bucket counts differ: {hp1.b} vs {hp2.b}")
    _check_b(hp1.b)
    return np.fft.irfft(_spectral_sum(_spectra(f.A, hp1), _spectra(f.B, hp2)), n=hp1.b)


def compressed_product_order3(
    f: GradientFactors, hp1: HashPair, hp2: HashPair, hp3: HashPair
) -> np.ndarray:
    """Count-sketch of ``sum_i a_i (x) b_i (x) b_i`` under h1+h2+h3 mod b."""
    if not (hp1.b == hp2.b == hp3.b):
        raise SizeError("bucket counts differ across the three hashes")
    _check_b(hp1.b)
    return np.fft.irfft(
        _spectral_sum(_spectra(f.A, hp1), _spectra(f.B, hp2), _spectra(f.B, hp3)),
        n=hp1.b,
    )

"""Approximate top-entry extraction from a sketched implicit gradient.

Each repetition sketches ``parts * l`` row-masked compressed products (one
per code bit and tensor axis) plus one unmasked product, thresholds the
masked rows at ``delta / 2`` and decodes every bucket whose unmasked value is
itself significant. Tuples decoded in at least half of the ``d`` repetitions
survive.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .codes import PLAIN, DecodedVotes, IndexCodeTable, binarify, build_code, decode, majority_filter
from .errors import ConfigError, SizeError
from .sketch import GradientFactors, HashPair, count_sketch, next_pow2

log = logging.getLogger(__name__)

# constants of the top-entry recovery guarantee: b * delta^2 >= 432 ||G||_F^2,
# d >= 48 ln(2 c k)
B_CONST = 432.0
D_CONST = 48.0


def derive_seed(*keys: int) -> int:
    """Deterministic 64-bit seed from a tuple of non-negative integers."""
    ss = np.random.SeedSequence([int(k) & 0xFFFFFFFFFFFFFFFF for k in keys])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass
class AteeParams:
    b: int
    d: int = 3
    delta: float | None = None  # None: ||G||_F / sqrt(2 k_top), recomputed per call
    k_top: int = 1
    scheme: str = PLAIN
    hash_reuse: bool = False

    def __post_init__(self):
        if self.b < 1:
            raise ConfigError(f"b must be >= 1, got {self.b}")
        if self.d < 1:
            raise ConfigError(f"d must be >= 1, got {self.d}")
        if self.delta is not None and not self.delta > 0:
            raise ConfigError(f"delta must be > 0, got {self.delta}")
        if self.k_top < 1:
            raise ConfigError(f"k_top must be >= 1, got {self.k_top}")

    @property
    def b_eff(self) -> int:
        return next_pow2(self.b)


@dataclass
class TheoryBounds:
    L: float = 1.0
    omega: float = 20.0
    G: float = 0.0
    c: float = 4.0
    nu: float | None = None
    rho: float | None = None

    def __post_init__(self):
        for name in ("L", "omega", "G", "c"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be nonnegative")


def gradient_norm_bound(bounds: TheoryBounds, k: int) -> float:
    """Upper bound ``2 L sqrt(k) omega + G`` on the batch gradient norm."""
    return 2.0 * bounds.L * math.sqrt(k) * bounds.omega + bounds.G


def default_delta(grad_norm: float, k_top: int) -> float:
    return grad_norm / math.sqrt(2.0 * k_top)


def min_repetitions(c: float, k: float) -> int:
    """Smallest d with ``d >= 48 ln(2 c k)`` (at least 1)."""
    arg = 2.0 * c * k
    if arg <= 1.0:
        return 1
    return max(1, math.ceil(D_CONST * math.log(arg)))


def validate_params(params: AteeParams, grad_norm_est: float, bounds: TheoryBounds | None = None) -> dict:
    """Check b and d against the recovery guarantee; advisory only.

    The guarantee targets the top ``2k`` entries, so ``k = k_top / 2`` is
    used inside the logarithm. ``min_d_ktop`` reports the reading with
    ``k = k_top`` for comparison.
    """
    if grad_norm_est < 0:
        raise ConfigError("gradient norm estimate must be nonnegative")
    bounds = bounds or TheoryBounds()
    delta = params.delta if params.delta is not None else default_delta(grad_norm_est, params.k_top)
    need = B_CONST * grad_norm_est ** 2
    if need == 0.0:
        min_b = 1
    elif delta <= 0:
        min_b = math.inf
    else:
        min_b = math.ceil(need / delta ** 2)
    min_d = min_repetitions(bounds.c, params.k_top / 2.0)
    report = {
        "b": params.b,
        "b_eff": params.b_eff,
        "d": params.d,
        "delta": delta,
        "grad_norm": grad_norm_est,
        "min_b": min_b,
        "b_ok": params.b * delta ** 2 >= need,
        "min_d": min_d,
        "min_d_ktop": min_repetitions(bounds.c, params.k_top),
        "d_ok": params.d >= min_d,
        "c": bounds.c,
    }
    if not report["d_ok"]:
        log.warning("d=%d is below the guarantee's d>=%d (c=%g); running anyway", params.d, min_d, bounds.c)
    return report


@dataclass
class SketchBank:
    """Sketches of one set of factor panels under fixed codes and hashes.

    ``S[t, k * l + r]`` is the compressed product with axis ``k`` masked by
    code column ``r``; ``totals[t]`` is the unmasked product. Both are in
    gradient units (already divided by m).
    """

    S: np.ndarray
    totals: np.ndarray
    hashes: list = field(repr=False)
    table: IndexCodeTable = field(repr=False)
    order: int = 2

    def __add__(self, other: "SketchBank") -> "SketchBank":
        if self.S.shape != other.S.shape:
            raise SizeError("sketch banks differ in shape")
        return SketchBank(self.S + other.S, self.totals + other.totals, self.hashes, self.table, self.order)

    def scaled(self, factor: float) -> "SketchBank":
        return SketchBank(self.S * factor, self.totals * factor, self.hashes, self.table, self.order)


def draw_hashes(seed: int, d: int, b: int, p: int, order: int = 2, reuse: bool = False) -> list:
    """One tuple of ``order`` hash pairs per repetition.

    With ``reuse`` the bucket maps of repetition 0 are shared by every
    repetition and only the signs are redrawn.
    """
    reps = []
    for t in range(d):
        reps.append(tuple(HashPair(derive_seed(seed, t, a), b, p) for a in range(order)))
    if reuse and d > 1:
        base = reps[0]
        reps = [base] + [
            tuple(HashPair.from_maps(base[a].h, reps[t][a].s, b) for a in range(order))
            for t in range(1, d)
        ]
    return reps


def interaction_sketch(f: GradientFactors, table: IndexCodeTable, hashes: list) -> SketchBank:
    """Sketch ``f`` once per repetition (see :class:`SketchBank`)."""
    if table.p != f.p:
        raise SizeError(f"code table built for p={table.p}, panels have p={f.p}")
    d = len(hashes)
    b = hashes[0][0].b
    parts = f.order
    panels = (f.A, f.B, f.B)[:parts]
    l = table.l
    m = max(f.m, 1)
    S = np.zeros((d, parts * l, b))
    totals = np.zeros((d, b))
    # repeated code columns give identical masked sketches; compute each once
    cols, inverse = np.unique(table.E.T, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)
    row_sets = [np.flatnonzero(c) for c in cols]
    for t, hps in enumerate(hashes):
        if len(hps) != parts:
            raise SizeError(f"need {parts} hash pairs per repetition, got {len(hps)}")
        if any(hp.b != b for hp in hps):
            raise SizeError("bucket counts differ across hashes")
        spectra = [np.fft.rfft(count_sketch(P, hp), axis=1) for P, hp in zip(panels, hps)]
        full = spectra[0]
        for sp in spectra[1:]:
            full = full * sp
        totals[t] = np.fft.irfft(full.sum(axis=0), n=b) / m
        for k in range(parts):
            others = spectra[:k] + spectra[k + 1:]
            rest = others[0]
            for sp in others[1:]:
                rest = rest * sp
            uniq = np.empty((len(row_sets), b))
            for u, rows in enumerate(row_sets):
                masked = np.fft.rfft(count_sketch(panels[k], hps[k], rows), axis=1)
                uniq[u] = np.fft.irfft((masked * rest).sum(axis=0), n=b) / m
            S[t, k * l:(k + 1) * l] = uniq[inverse]
    return SketchBank(S=S, totals=totals, hashes=hashes, table=table, order=parts)


def interaction_decode(bank: SketchBank, delta: float, cap: int | None = None):
    """Decode every significant bucket, vote across repetitions, cap the set.

    Returns index tuples sorted by descending vote count, then
    lexicographically; at most ``cap`` of them.
    """
    d = bank.S.shape[0]
    votes = DecodedVotes(d=d)
    for t in range(d):
        live = np.flatnonzero(np.abs(bank.totals[t]) > delta / 2.0)
        words = binarify(bank.S[t][:, live], delta)
        found = []
        for w in words:
            idx = decode(w, bank.table, parts=bank.order)
            if idx is not None:
                found.append(idx)
        votes.add_repetition(found)
    kept = majority_filter(votes)
    ranked = sorted(kept, key=lambda key: (-votes.counts[key], key))
    if cap is not None:
        ranked = ranked[:cap]
    return ranked


def sketch_norm(bank: SketchBank) -> float:
    """Estimate ``||gradient||_F`` from the unmasked bucket totals.

    Count-sketch preserves the squared norm in expectation; the estimate is
    averaged over repetitions.
    """
    return float(np.sqrt(np.mean(np.sum(bank.totals ** 2, axis=1))))


def atee_extract(f: GradientFactors, params: AteeParams, seed: int = 0, table: IndexCodeTable | None = None):
    """Index tuples expected to contain the top ``k_top`` entries above delta.

    Returns ``(indices, delta)``: the ranked tuples (at most ``params.b``)
    and the significance level applied. Without an explicit delta the level
    is ``||G||_F / sqrt(2 k_top)`` with the norm estimated from the sketch.
    """
    table = table or build_code(f.p, params.scheme)
    hashes = draw_hashes(seed, params.d, params.b_eff, f.p, f.order, params.hash_reuse)
    bank = interaction_sketch(f, table, hashes)
    delta = params.delta
    if delta is None:
        delta = default_delta(sketch_norm(bank), params.k_top)
    if delta <= 0:
        return [], delta
    return interaction_decode(bank, delta, cap=params.b), delta

"""Synthetic sparse-interaction datasets and their text serialization."""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations, combinations_with_replacement
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, SizeError
from .tensor import SparseTensor

FORMAT_TAG = "# intht-dataset v1"
REGIMES = ("uniform", "bernoulli")


@dataclass
class DataSet:
    X: np.ndarray
    y: np.ndarray
    theta_star: SparseTensor
    regime: str
    seed: int

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def order(self) -> int:
        return self.theta_star.order

    @property
    def K(self) -> int:
        return len(self.theta_star)


def monomials(X: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """(n, len(idx)) matrix of ``prod_c X[:, idx[:, c]]``."""
    out = X[:, idx[:, 0]].copy()
    for c in range(1, idx.shape[1]):
        out *= X[:, idx[:, c]]
    return out


def model_values(theta: SparseTensor, X) -> np.ndarray:
    """Evaluate the model at every row of ``X``, summing entries in key order."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != theta.p:
        raise SizeError(f"features have {X.shape[1]} columns, model expects p={theta.p}")
    out = np.zeros(X.shape[0])
    for idx in sorted(theta.entries):
        term = X[:, idx[0]] * theta.entries[idx]
        for i in idx[1:]:
            term = term * X[:, i]
        out += term
    return out


def evaluate_model(theta: SparseTensor, x) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise SizeError("evaluate_model takes a single feature vector")
    return float(model_values(theta, x[None, :])[0])


def candidate_positions(p: int, order: int, include_diagonal: bool = False) -> list:
    """Sorted index tuples eligible for the true support.

    Coordinate ``p - 1`` is the appended constant, so tuples containing it
    are the linear terms and the intercept. Unless ``include_diagonal``,
    tuples that repeat a non-constant coordinate (squares, cubes) are left out.
    """
    if p < 2:
        raise ConfigError(f"p must be >= 2, got {p}")
    if include_diagonal:
        return list(combinations_with_replacement(range(p), order))
    const = p - 1
    out = []
    for r in range(order, -1, -1):
        for head in combinations(range(const), r):
            out.append(head + (const,) * (order - r))
    return sorted(out)


def _sample_support(rng, p, K, order, include_diagonal):
    cand = candidate_positions(p, order, include_diagonal)
    if K > len(cand):
        raise ConfigError(f"K={K} exceeds the {len(cand)} candidate positions")
    if K < 0:
        raise ConfigError(f"K must be >= 0, got {K}")
    pick = np.sort(rng.choice(len(cand), size=K, replace=False))
    return [cand[i] for i in pick]


def _finish(X, theta, regime, seed, rng, noise_std) -> DataSet:
    y = model_values(theta, X)
    if noise_std:
        y = y + rng.normal(0.0, noise_std, size=y.shape)
    return DataSet(X=X, y=y, theta_star=theta, regime=regime, seed=seed)


def gen_uniform(n, p, K, order=2, seed=0, include_diagonal=False, noise_std=0.0) -> DataSet:
    """Uniform[-1, 1] features; coefficients uniform on [-20, -10] U [10, 20]."""
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1.0, 1.0, size=(n, p))
    X[:, -1] = 1.0
    support = _sample_support(rng, p, K, order, include_diagonal)
    mags = rng.uniform(10.0, 20.0, size=len(support))
    signs = rng.choice([-1.0, 1.0], size=len(support))
    theta = SparseTensor(p, order, dict(zip(support, mags * signs)))
    return _finish(X, theta, "uniform", seed, rng, noise_std)


def gen_bernoulli(n, p, K, order=2, seed=0, include_diagonal=False, noise_std=0.0) -> DataSet:
    """Rademacher features and Rademacher coefficients."""
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    X = rng.choice([-1.0, 1.0], size=(n, p))
    X[:, -1] = 1.0
    support = _sample_support(rng, p, K, order, include_diagonal)
    vals = rng.choice([-1.0, 1.0], size=len(support))
    theta = SparseTensor(p, order, dict(zip(support, vals)))
    return _finish(X, theta, "bernoulli", seed, rng, noise_std)


def generate(regime: str, n, p, K, order=2, seed=0, include_diagonal=False, noise_std=0.0) -> DataSet:
    if regime == "uniform":
        return gen_uniform(n, p, K, order, seed, include_diagonal, noise_std)
    if regime == "bernoulli":
        return gen_bernoulli(n, p, K, order, seed, include_diagonal, noise_std)
    raise ConfigError(f"unknown regime {regime!r}; expected one of {REGIMES}")


def save_dataset(ds: DataSet, path) -> None:
    """Write the text format: tag, header, one sample per line, coefficients.

    Sample lines hold the p features followed by y. Coefficient lines hold
    the index tuple followed by the value. Floats use ``repr`` so a load
    reproduces the arrays exactly.
    """
    lines = [FORMAT_TAG, f"{ds.p} {ds.n} {ds.K} {ds.order} {ds.regime} {ds.seed}"]
    for row, yi in zip(ds.X, ds.y):
        lines.append(" ".join(repr(float(v)) for v in row) + " " + repr(float(yi)))
    for idx in sorted(ds.theta_star.entries):
        lines.append(" ".join(str(i) for i in idx) + " " + repr(ds.theta_star.entries[idx]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_dataset(path) -> DataSet:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if not text or text[0].strip() != FORMAT_TAG:
        raise DataError(f"{path}: missing format tag {FORMAT_TAG!r}")
    try:
        p, n, K, order = (int(v) for v in text[1].split()[:4])
        regime, seed = text[1].split()[4], int(text[1].split()[5])
        rows = np.array([[float(v) for v in ln.split()] for ln in text[2:2 + n]])
        entries = {}
        for ln in text[2 + n:2 + n + K]:
            parts = ln.split()
            entries[tuple(int(v) for v in parts[:order])] = float(parts[order])
    except (IndexError, ValueError) as exc:
        raise DataError(f"{path}: malformed dataset ({exc})") from exc
    if rows.shape != (n, p + 1) or len(entries) != K:
        raise DataError(f"{path}: header does not match body")
    return DataSet(X=rows[:, :p], y=rows[:, p], theta_star=SparseTensor(p, order, entries), regime=regime, seed=seed)

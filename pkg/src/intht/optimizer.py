"""Iterative hard thresholding over implicit interaction gradients.

Parameters are monomial coefficients keyed by sorted index tuples. The
gradient step is taken in the full p x p (or p x p x p) tensor space, as in
plain IHT on the unfolded parameter, so a coefficient whose monomial has
``r`` distinct index orderings moves by ``r`` times the corresponding
gradient entry. Hard thresholding then keeps ``k`` coefficients.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass

import numpy as np

from .atee import (
    AteeParams,
    default_delta,
    derive_seed,
    draw_hashes,
    interaction_decode,
    interaction_sketch,
    atee_extract,
    sketch_norm,
)
from .codes import build_code
from .data import DataSet, model_values, monomials
from .errors import ConfigError, DataError
from .sketch import GradientFactors
from .tensor import SparseTensor, canonical, hard_threshold, multiplicity, top_k_indices

log = logging.getLogger(__name__)

# stream ids for derive_seed
_BATCH, _SKETCH, _VR_HASH, _VR_PICK = 1, 2, 3, 4


@dataclass
class IterateRecord:
    t: int
    frob_error: float
    support_precision: float
    support_recall: float
    atee_set_size: int
    wall_ms: float


def residuals(theta: SparseTensor, data: DataSet, batch=None) -> np.ndarray:
    """Squared-loss residuals ``model(x_i) - y_i`` over ``batch`` (all rows if None)."""
    if batch is None:
        return model_values(theta, data.X) - data.y
    batch = np.asarray(batch, dtype=np.int64)
    if batch.size and (batch.min() < 0 or batch.max() >= data.n):
        raise DataError(f"batch index out of range for n={data.n}")
    return model_values(theta, data.X[batch]) - data.y[batch]


def restricted_gradient(X: np.ndarray, u: np.ndarray, support) -> dict:
    """``{idx: mean(u * prod x[idx])}`` for every tuple in ``support``."""
    support = sorted(support)
    if not support:
        return {}
    idx = np.array(support, dtype=np.int64)
    g = u @ monomials(X, idx) / X.shape[0]
    return dict(zip(support, g.tolist()))


def gradient_on_support(theta: SparseTensor, data: DataSet, batch, support) -> dict:
    """Batch gradient entries on ``support``; nothing else is evaluated."""
    batch = np.arange(data.n) if batch is None else np.asarray(batch, dtype=np.int64)
    u = residuals(theta, data, batch)
    return restricted_gradient(data.X[batch], u, support)


def exact_top_extract(f: GradientFactors, k_top: int, folded: bool = False) -> list:
    """Top ``k_top`` entries of the materialized gradient.

    With ``folded`` only sorted index tuples are ranked, each by the gradient
    summed over its orderings (the quantity the optimizer steps along).
    """
    G = f.dense()
    if folded:
        keys = np.argwhere(_sorted_mask(f.p, f.order))
        vals = G[tuple(keys.T)] * _multiplicities(keys)
    else:
        keys = np.argwhere(np.ones(G.shape, dtype=bool))
        vals = G.ravel()
    if k_top < vals.size:
        # shortlist everything tied with the k-th magnitude before the exact sort
        cut = np.partition(np.abs(vals), vals.size - k_top)[vals.size - k_top]
        keep = np.abs(vals) >= cut
        keys, vals = keys[keep], vals[keep]
    return top_k_indices(keys, vals, k_top)


def _multiplicities(keys: np.ndarray) -> np.ndarray:
    distinct = 1 + np.sum(np.diff(keys, axis=1) != 0, axis=1)
    if keys.shape[1] == 2:
        return np.where(distinct == 2, 2.0, 1.0)
    return np.choose(distinct - 1, [1.0, 3.0, 6.0])


def _sorted_mask(p: int, order: int) -> np.ndarray:
    if order == 2:
        return np.triu(np.ones((p, p), dtype=bool))
    i, j, k = np.ogrid[:p, :p, :p]
    return (i <= j) & (j <= k)


def _step(theta: SparseTensor, grad: dict, eta: float, k: int) -> SparseTensor:
    new = dict(theta.entries)
    for idx, g in grad.items():
        new[idx] = new.get(idx, 0.0) - eta * multiplicity(idx) * g
    return hard_threshold(new, k, p=theta.p, order=theta.order)


def support_metrics(theta: SparseTensor, theta_star: SparseTensor):
    """``(frob_error, precision, recall)`` of H_K(fold theta) against the true support."""
    err = theta.frobenius_distance(theta_star)
    truth = theta_star.folded().support()
    est = hard_threshold(theta.folded(), len(truth)).support() if truth else set()
    hit = len(est & truth)
    prec = hit / len(est) if est else 1.0
    rec = hit / len(truth) if truth else 1.0
    return err, prec, rec


def _record(t, theta, theta_star, set_size, start) -> IterateRecord:
    if theta_star is None:
        err, prec, rec = math.nan, math.nan, math.nan
    else:
        err, prec, rec = support_metrics(theta, theta_star)
    return IterateRecord(t, err, prec, rec, set_size, (time.perf_counter() - start) * 1e3)


def _initial(config, data, theta0) -> SparseTensor:
    if theta0 is None:
        return SparseTensor(data.p, config.order)
    if theta0.order != config.order or theta0.p != data.p:
        raise ConfigError("initial tensor does not match p / order")
    return theta0.folded()


def _check(config, data) -> None:
    if config.m > data.n:
        raise ConfigError(f"batch size m={config.m} exceeds n={data.n}")
    if data.order != config.order:
        raise ConfigError(f"data order {data.order} != config order {config.order}")
    if data.p != config.p:
        raise ConfigError(f"data has p={data.p}, config p={config.p}")


def candidates(f: GradientFactors, config, t: int, table=None):
    """Candidate support for one iteration plus the delta used (nan in exact mode)."""
    k_top = 2 * config.k_eff
    if config.mode == "exact":
        return [tuple(c) for c in exact_top_extract(f, k_top, folded=True)], math.nan
    params = AteeParams(b=config.b, d=config.d, delta=config.delta, k_top=k_top,
                        scheme=config.scheme, hash_reuse=config.hash_reuse)
    found, delta = atee_extract(f, params, seed=derive_seed(config.seed, _SKETCH, t), table=table)
    return [canonical(c) for c in found], delta


def intht_run(config, data: DataSet, theta_star: SparseTensor | None = None, theta0: SparseTensor | None = None):
    """Run ``config.T`` IHT iterations with sketched (or exact) top-entry search.

    ``theta_star`` is only used for the per-iteration metrics. Returns the
    final tensor and one :class:`IterateRecord` per iteration.
    """
    _check(config, data)
    k = config.k_eff
    eta = config.eta_eff
    theta = _initial(config, data, theta0)
    rng = np.random.default_rng(derive_seed(config.seed, _BATCH))
    table = build_code(data.p, config.scheme) if config.mode != "exact" else None
    records = []
    start = time.perf_counter()
    for t in range(config.T):
        batch = rng.choice(data.n, size=config.m, replace=False)
        Xb = data.X[batch]
        u = model_values(theta, Xb) - data.y[batch]
        f = GradientFactors.from_batch(Xb, u, config.order)
        found, delta = candidates(f, config, t, table)
        support = set(found) | theta.support()
        theta = _step(theta, restricted_gradient(Xb, u, support), eta, k)
        records.append(_record(t + 1, theta, theta_star, len(set(found)), start))
        if t == 0 and not math.isnan(delta):
            log.info("iteration 0: delta=%.4g, buckets b=%d (effective %d)", delta, config.b, AteeParams(b=config.b).b_eff)
    return theta, records


def intht_order3_run(config, data: DataSet, theta_star=None, theta0=None):
    if config.order != 3 or data.order != 3:
        raise ConfigError("order-3 run needs order=3 config and data")
    return intht_run(config, data, theta_star, theta0)


def intht_vr_run(config, data: DataSet, theta_star=None, theta0=None):
    """Variance-reduced variant: one full-data sketch per outer round.

    Inner steps sketch only the residual differences against the round's
    anchor under the same codes and hashes, and add that sketch to the
    anchor's. The next anchor is an inner iterate chosen uniformly.
    Records are emitted once per outer round (``config.T`` rounds).
    """
    _check(config, data)
    if config.t_inner < 1:
        raise ConfigError("t_inner must be >= 1")
    k = config.k_eff
    eta = config.eta_eff
    k_top = 2 * k
    theta = _initial(config, data, theta0)
    rng = np.random.default_rng(derive_seed(config.seed, _BATCH))
    pick = np.random.default_rng(derive_seed(config.seed, _VR_PICK))
    table = build_code(data.p, config.scheme)
    b_eff = AteeParams(b=config.b, d=config.d).b_eff
    records = []
    start = time.perf_counter()
    for i in range(config.T):
        anchor = theta
        hashes = draw_hashes(derive_seed(config.seed, _VR_HASH, i), config.d, b_eff, data.p, config.order, config.hash_reuse)
        u0 = residuals(anchor, data)
        full_bank = interaction_sketch(GradientFactors.from_batch(data.X, u0, config.order), table, hashes)
        inner = [anchor]
        cur = anchor
        sizes = 0
        for j in range(config.t_inner):
            batch = rng.choice(data.n, size=config.m, replace=False)
            Xb = data.X[batch]
            du = model_values(cur, Xb) - data.y[batch] - u0[batch]
            bank = full_bank + interaction_sketch(GradientFactors.from_batch(Xb, du, config.order), table, hashes)
            delta = config.delta if config.delta is not None else default_delta(sketch_norm(bank), k_top)
            found = [canonical(c) for c in interaction_decode(bank, delta, cap=config.b)] if delta > 0 else []
            sizes = len(set(found))
            support = set(found) | cur.support()
            grad = vr_gradient(data.X, u0, Xb, du, support)
            cur = _step(cur, grad, eta, k)
            inner.append(cur)
        # anchor for the next round: one of the iterates 0..t_inner-1
        theta = inner[int(pick.integers(config.t_inner))]
        records.append(_record(i + 1, theta, theta_star, sizes, start))
    return theta, records


def vr_gradient(X, u0, Xb, du, support) -> dict:
    """Full-data gradient at the anchor plus the batch correction, on ``support``."""
    full = restricted_gradient(X, u0, support)
    corr = restricted_gradient(Xb, du, support)
    return {idx: full[idx] + corr[idx] for idx in full}

"""Planted-gradient instances for extraction tests."""
import numpy as np

from intht.sketch import GradientFactors


def planted_factors(p, entries, noise=0.0, noise_cols=0, rng=None):
    """Panels whose product / m equals the planted entries plus low-rank noise.

    ``entries`` maps (i, j) -> value. Each planted entry gets its own column;
    ``noise_cols`` extra columns of N(0, noise^2) vectors add diffuse mass.
    """
    cols_a, cols_b = [], []
    for (i, j), v in entries.items():
        a, b = np.zeros(p), np.zeros(p)
        a[i], b[j] = v, 1.0
        cols_a.append(a)
        cols_b.append(b)
    for _ in range(noise_cols):
        cols_a.append(noise * rng.normal(size=p))
        cols_b.append(rng.normal(size=p))
    A, B = np.array(cols_a).T, np.array(cols_b).T
    m = A.shape[1]
    # scale so that A @ B.T / m reproduces the planted values
    return GradientFactors(A * m, B)


def oracle_top_set(f, k_top, delta):
    """Top-k_top entries of the dense gradient whose magnitude exceeds delta."""
    G = f.dense()
    flat = [((i, j), G[i, j]) for i in range(G.shape[0]) for j in range(G.shape[1])]
    flat.sort(key=lambda e: (-abs(e[1]), e[0]))
    return {idx for idx, v in flat[:k_top] if abs(v) > delta}

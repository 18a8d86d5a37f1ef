"""Independent reference implementations used to pin expected test values.

Everything here deliberately avoids the package's operator/solver code paths:
scalar roots come from bisection, Poisson quantities from scipy's gamma
functions, and cascades from a from-scratch generation recomputation.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special


def poisson_pmf_ref(k: int, lam: float) -> float:
    """Poisson pmf via log-gamma, accurate for large k and lam."""
    if lam == 0:
        return 1.0 if k == 0 else 0.0
    return math.exp(k * math.log(lam) - lam - special.gammaln(k + 1))


def poisson_tail_ref(k: int, lam) -> np.ndarray:
    """P(Poisson(lam) >= k) through the regularized incomplete gamma function."""
    lam = np.asarray(lam, dtype=float)
    if k == 0:
        return np.ones_like(lam)
    return special.gammainc(k, lam)


def scalar_map(level: float, threshold_probs, z: float) -> float:
    """Right-hand side of the scalar fixed-point equation for a constant kernel."""
    lam = level * z
    return sum(q * float(poisson_tail_ref(k, lam)) for k, q in threshold_probs)


def scalar_min_root(level: float, threshold_probs, tol: float = 1e-13) -> float:
    """Smallest root of z = scalar_map(z) by sign-change bisection from zero.

    The map minus identity is positive on [0, root) and changes sign at the
    minimal root, located by stepping right until the sign flips.
    """
    g = lambda z: scalar_map(level, threshold_probs, z) - z
    lo = 0.0
    step = 1e-3
    hi = step
    while hi <= 1.0 and g(hi) > 0:
        lo, hi = hi, hi + step
    if hi > 1.0:
        return 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


def rank_one_integral(phi, weights, threshold_probs, tol: float = 1e-13) -> float:
    """Fixed-point integral for a separable kernel phi(x) phi(y), 1-D reduction.

    Solves theta = sum_s w(s) phi(s) f_theta(s) with
    f_theta(s) = sum_k q_k P(Poi(phi(s) theta) >= k), then integrates f.
    """
    phi = np.asarray(phi, dtype=float)
    weights = np.asarray(weights, dtype=float)

    def profile(theta):
        lam = phi * theta
        return sum(q * poisson_tail_ref(k, lam) for k, q in threshold_probs)

    theta = 0.0
    for _ in range(1_000_000):
        nxt = float(np.dot(weights * phi, profile(theta)))
        if abs(nxt - theta) < tol:
            theta = nxt
            break
        theta = nxt
    return float(np.dot(weights, profile(theta)))


def brute_force_infected(n: int, thresholds: np.ndarray, adjacency: np.ndarray) -> np.ndarray:
    """Final infected set by recomputing every generation from scratch.

    adjacency[i, j] marks a directed edge i -> j; generation m holds every
    vertex whose infected in-neighbors in generation m-1 reach its threshold.
    """
    infected = thresholds == 0
    while True:
        counts = adjacency[infected].sum(axis=0)
        new = counts >= thresholds
        if np.array_equal(new, infected):
            return infected
        infected = new


def dense_adjacency(graph) -> np.ndarray:
    """Dense boolean adjacency of a CSR percolation graph (small n only)."""
    adj = np.zeros((graph.n, graph.n), dtype=bool)
    for i in range(graph.n):
        adj[i, graph.out_edges(i)] = True
    return adj

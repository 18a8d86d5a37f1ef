"""Independent scalar oracles for configurations with closed-form structure.

Constant kernels make the fixed-point equation one scalar equation; rank-one
product kernels reduce it to one scalar unknown through the weighted
integral of the profile. Both are solved here with self-contained math-only
code (no shared operator machinery) so they can double-check the grid
solvers.
"""

from __future__ import annotations

import math
from typing import Sequence

__all__ = ["scalar_fixed_point", "rank_one_fixed_point", "oracle_for_config"]


def _poisson_tail_scalar(k: int, lam: float) -> float:
    """P(Poisson(lam) >= k) by direct summation of the complement."""
    acc = 0.0
    term = math.exp(-lam)
    for j in range(k):
        acc += term
        term *= lam / (j + 1)
    return max(0.0, 1.0 - acc)


def scalar_fixed_point(
    level: float,
    threshold_probs: Sequence[tuple[int, float]],
    tolerance: float = 1e-13,
    max_iterations: int = 1_000_000,
) -> float:
    """Smallest root of z = sum_k q_k * P(Poisson(level * z) >= k).

    ``threshold_probs`` lists (threshold, probability) for a type-independent
    population; iteration from zero climbs to the minimal root.
    """
    z = 0.0
    for _ in range(max_iterations):
        lam = level * z
        z_next = sum(q * _poisson_tail_scalar(k, lam) for k, q in threshold_probs)
        if abs(z_next - z) < tolerance:
            return z_next
        z = z_next
    raise RuntimeError("scalar fixed-point iteration did not converge")


def rank_one_fixed_point(
    phi_values: Sequence[float],
    cell_weights: Sequence[float],
    threshold_probs: Sequence[tuple[int, float]],
    tolerance: float = 1e-13,
    max_iterations: int = 1_000_000,
) -> float:
    """Fixed-point integral for a rank-one kernel phi(x) * phi(y).

    The profile is f(s) = sum_k q_k * P(Poisson(phi(s) * theta) >= k) with the
    single scalar unknown theta = integral of phi * f; iterate theta from
    zero, then integrate the resulting profile.
    """
    theta = 0.0
    for _ in range(max_iterations):
        theta_next = sum(
            w * p * sum(q * _poisson_tail_scalar(k, p * theta) for k, q in threshold_probs)
            for p, w in zip(phi_values, cell_weights)
        )
        if abs(theta_next - theta) < tolerance:
            theta = theta_next
            break
        theta = theta_next
    else:
        raise RuntimeError("rank-one fixed-point iteration did not converge")
    return sum(
        w * sum(q * _poisson_tail_scalar(k, p * theta) for k, q in threshold_probs)
        for p, w in zip(phi_values, cell_weights)
    )


def oracle_for_config(kernel_spec: str, thresholds: Sequence[tuple[int, float]], cells: int) -> dict:
    """Oracle record for a config, or raise ValueError if none applies.

    Only constant and product kernels with type-independent threshold
    probabilities admit a scalar reduction.
    """
    total = sum(q for _, q in thresholds)
    probs = [(int(k), q / total) for k, q in thresholds]
    if kernel_spec.startswith("constant:"):
        level = float(kernel_spec.split(":", 1)[1])
        root = scalar_fixed_point(level, probs)
        return {"kind": "constant", "root": root, "integral": root}
    if kernel_spec.startswith("product:"):
        coeffs = [float(c) for c in kernel_spec.split(":", 1)[1].split(",") if c]
        mids = [(i + 0.5) / cells for i in range(cells)]
        phi = [sum(c * m**j for j, c in enumerate(coeffs)) for m in mids]
        weights = [1.0 / cells] * cells
        integral = rank_one_fixed_point(phi, weights, probs)
        return {"kind": "product", "integral": integral}
    raise ValueError(f"no scalar oracle for kernel {kernel_spec!r}")

"""Closed-form cascade system for graphs with finitely many vertex types.

State is a vector z with one entry per type: the mu-mass of infected vertices
of that type whose effect on the system has been explored. The closed-form
masses below describe how much of each (type, threshold) class remains at
state z; their first joint zero gives the asymptotic infected fraction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError
from .model import StepKernel, ThresholdMeasure, TypeGrid
from .operators import poisson_pmf, poisson_tail

__all__ = [
    "FiniteTypeSystem",
    "state_masses",
    "first_joint_zero",
    "stability_margin",
    "embed_step_function",
    "system_from_step_kernel",
]


@dataclass(frozen=True)
class FiniteTypeSystem:
    """Discrete-kernel system: N types, thresholds 0..K, absolute initial masses.

    ``initial_masses[k, l]`` is the population fraction of type l with
    threshold k; all entries sum to one. ``kernel_d[l', l]`` scales edges sent
    from type l' to type l.
    """

    type_count: int
    kernel_d: np.ndarray
    initial_masses: np.ndarray
    max_threshold: int

    def __post_init__(self):
        kd = np.asarray(self.kernel_d, dtype=float)
        masses = np.asarray(self.initial_masses, dtype=float)
        if kd.shape != (self.type_count, self.type_count):
            raise ValueError("kernel_d must be square with one row per type")
        if np.any(kd < 0):
            raise ValueError("kernel_d must be non-negative")
        if masses.shape != (self.max_threshold + 1, self.type_count):
            raise ValueError("initial_masses must have one row per threshold 0..K")
        if np.any(masses < 0):
            raise ValueError("initial_masses must be non-negative")
        if abs(masses.sum() - 1.0) > 1e-10:
            raise ValueError("initial_masses must sum to 1")

    def intensities(self, z: np.ndarray) -> np.ndarray:
        """Per-type edge intensity lambda(l) = sum_l' kernel_d(l', l) z(l')."""
        return z @ self.kernel_d


def _check_state(sys: FiniteTypeSystem, z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.shape != (sys.type_count,):
        raise ValueError(f"state has shape {z.shape}, expected ({sys.type_count},)")
    if np.any(z < 0) or np.any(z > 1):
        raise ValueError("state entries must lie in [0, 1]")
    return z


def state_masses(sys: FiniteTypeSystem, z: np.ndarray) -> np.ndarray:
    """Masses of every (threshold, type) class at state z, shape (K+1, N).

    Row 0 is the unexplored-infected mass; row k >= 1 the mass still needing
    k more infected neighbors. Uses the closed form in the Poisson
    intensities, never integrating the underlying dynamics.
    """
    z = _check_state(sys, z)
    lam = sys.intensities(z)
    k_max = sys.max_threshold
    tails = poisson_tail(k_max, lam)
    out = np.empty_like(sys.initial_masses)
    out[0] = -z + np.einsum("ks,ks->s", sys.initial_masses, tails)
    # pmf table p(j, lam) for j = 0..K-1 reused across the shifted sums.
    pmf = np.array([poisson_pmf(j, lam) for j in range(k_max)]) if k_max else np.empty((0, sys.type_count))
    for k in range(1, k_max + 1):
        out[k] = sum(
            sys.initial_masses[kp] * pmf[kp - k] for kp in range(k, k_max + 1)
        )
    return out


def first_joint_zero(
    sys: FiniteTypeSystem,
    tolerance: float = 1e-12,
    max_iterations: int = 100_000,
) -> tuple[np.ndarray, float]:
    """Componentwise-minimal root z_hat of the unexplored-infected masses.

    Iterates z <- z + mass_0(z) from zero. Each step is monotone
    non-decreasing and bounded by every root, so the iteration climbs to the
    minimal root; the total sum(z_hat) is the asymptotic infected fraction.
    """
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    z = np.zeros(sys.type_count)
    for _ in range(max_iterations):
        z_next = z + state_masses(sys, z)[0]
        if np.any(z_next < z - 1e-12):
            raise ArithmeticError("zero-finding iteration stopped increasing")
        z_next = np.minimum(z_next, 1.0)
        if np.max(np.abs(z_next - z)) < tolerance:
            return z_next, float(z_next.sum())
        z = z_next
    raise ConvergenceError(
        f"first joint zero not located within {max_iterations} iterations",
        last=z,
        residual=float(np.max(np.abs(state_masses(sys, z)[0]))),
    )


def stability_margin(
    sys: FiniteTypeSystem, z_hat: np.ndarray, weights: np.ndarray | None = None
) -> float:
    """Directional-derivative margin of the zero-mass system at z_hat.

    Returns max over types of sum_l' w(l') * d mass_0(l)/d z(l'), where the
    partial is -delta(l,l') + kernel_d(l',l) * mass_1(l). Negative means the
    cascade cannot restart from the root in direction w.
    """
    z_hat = _check_state(sys, z_hat)
    if weights is None:
        weights = np.full(sys.type_count, 1.0 / sys.type_count)
    weights = np.asarray(weights, dtype=float)
    if np.any(weights <= 0):
        raise ValueError("direction weights must be positive")
    mass1 = state_masses(sys, z_hat)[1] if sys.max_threshold >= 1 else np.zeros(sys.type_count)
    return float(np.max(-weights + sys.intensities(weights) * mass1))


def embed_step_function(grid: TypeGrid, partition, z: np.ndarray) -> np.ndarray:
    """Lift per-type masses to a blockwise-constant grid function.

    Block l carries the constant z(l) / mu(block l), so blockwise integrals
    of the result reproduce z exactly.
    """
    z = np.asarray(z, dtype=float)
    if len(z) != len(partition):
        raise ValueError("one mass per partition block required")
    out = np.empty(grid.cell_count)
    for value, cells in zip(z, partition):
        mass = grid.weights[cells.start : cells.stop].sum()
        if mass <= 0:
            raise ValueError("every partition block needs positive mu-mass")
        out[cells.start : cells.stop] = value / mass
    return out


def system_from_step_kernel(
    step: StepKernel, grid: TypeGrid, measure: ThresholdMeasure
) -> FiniteTypeSystem:
    """Collapse a step kernel and measure into their finite-type system.

    Initial masses are the blockwise integrals of the threshold densities;
    the discrete kernel is the block-value matrix.
    """
    if measure.tail_mass > 0:
        raise ValueError("finite-type systems need the full threshold family (tail_mass 0)")
    block_of = step.cell_blocks(grid.cell_count)
    masses = np.zeros((measure.max_threshold + 1, step.level))
    weighted = measure.densities * grid.weights
    for b in range(step.level):
        masses[:, b] = weighted[:, block_of == b].sum(axis=1)
    return FiniteTypeSystem(
        type_count=step.level,
        kernel_d=np.asarray(step.block_values, dtype=float),
        initial_masses=masses,
        max_threshold=measure.max_threshold,
    )

"""Grid operators driving the infection dynamics.

Everything acts on grid functions (numpy arrays, one value per cell) through
an OperatorContext that pins the grid, kernel, and threshold measure. The
central map sends an infection profile f to the profile of infection
probabilities of a vertex whose infected in-degree is Poisson with mean
``intensity(ctx, f)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import KernelModel, StepKernel, ThresholdMeasure, TypeGrid

__all__ = [
    "OperatorContext",
    "intensity",
    "poisson_pmf",
    "poisson_tail",
    "infection_map",
    "infection_map_derivative",
    "marginal_density",
]

# Direct lambda**k / k! evaluation is exact enough below these; beyond them the
# power or factorial would lose precision or overflow, so switch to log space.
_DIRECT_K_MAX = 20
_DIRECT_LAMBDA_MAX = 30.0


@dataclass(frozen=True)
class OperatorContext:
    """Immutable bundle of grid, kernel, and measure with the tabulated kernel matrix."""

    grid: TypeGrid
    kernel: KernelModel | StepKernel
    measure: ThresholdMeasure
    kernel_matrix: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.measure.cell_count != self.grid.cell_count:
            raise ValueError("measure and grid disagree on the cell count")
        object.__setattr__(self, "kernel_matrix", self.kernel.matrix(self.grid))

    @property
    def max_threshold(self) -> int:
        return self.measure.max_threshold


def _check_profile(ctx: OperatorContext, f: np.ndarray, unit: bool) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape != (ctx.grid.cell_count,):
        raise ValueError(f"grid function has shape {f.shape}, expected ({ctx.grid.cell_count},)")
    if np.any(f < 0) or not np.all(np.isfinite(f)):
        raise ValueError("grid function must be finite and non-negative")
    if unit and np.any(f > 1.0):
        raise ValueError("infection profile must take values in [0, 1]")
    return f


def intensity(ctx: OperatorContext, f: np.ndarray) -> np.ndarray:
    """Mean infected in-degree per type: out(j) = sum_i k(x_i, x_j) f(i) w(i)."""
    f = _check_profile(ctx, f, unit=False)
    return (f * ctx.grid.weights) @ ctx.kernel_matrix


def poisson_pmf(k: int, lam: float | np.ndarray) -> np.ndarray | float:
    """Poisson probability lam**k / k! * exp(-lam), vectorized over lam.

    Evaluated directly for small k and lam, in log space otherwise so large
    counts neither overflow nor lose the exponent.
    """
    if k < 0:
        raise ValueError("k must be a non-negative integer")
    lam_arr = np.asarray(lam, dtype=float)
    if np.any(lam_arr < 0):
        raise ValueError("lambda must be non-negative")
    scalar = np.isscalar(lam)

    if k <= _DIRECT_K_MAX:
        direct = lam_arr**k / math.factorial(k) * np.exp(-lam_arr)
    else:
        direct = np.zeros_like(lam_arr)
    if k > _DIRECT_K_MAX or np.any(lam_arr > _DIRECT_LAMBDA_MAX):
        with np.errstate(divide="ignore", invalid="ignore"):
            logs = k * np.log(lam_arr) - lam_arr - math.lgamma(k + 1)
        logged = np.where(lam_arr > 0, np.exp(logs), 1.0 if k == 0 else 0.0)
        use_log = (lam_arr > _DIRECT_LAMBDA_MAX) | (k > _DIRECT_K_MAX)
        direct = np.where(use_log, logged, direct)
    return float(direct) if scalar else direct


def poisson_tail(k_max: int, lam: np.ndarray) -> np.ndarray:
    """Upper tails P(Poisson(lam) >= k) for k = 0..k_max, shape (k_max+1, len(lam)).

    Computed as a complementary cumulative sum of pmf terms with Kahan
    compensation; clipped at zero where cancellation exhausts the tail.
    """
    lam = np.asarray(lam, dtype=float)
    tails = np.empty((k_max + 1,) + lam.shape)
    tails[0] = 1.0
    running = np.ones_like(lam)
    compensation = np.zeros_like(lam)
    for k in range(k_max):
        term = -np.asarray(poisson_pmf(k, lam)) + compensation
        updated = running + term
        compensation = term - (updated - running)
        running = updated
        tails[k + 1] = np.clip(running, 0.0, 1.0)
    return tails


def infection_map(ctx: OperatorContext, f: np.ndarray) -> np.ndarray:
    """Infection-probability profile of a profile f in [0, 1].

    out(s) = sum_k eta_k(s) * P(Poisson(intensity(f)(s)) >= k). The output is
    again in [0, 1] and dominates the seed density eta_0 pointwise.
    """
    f = _check_profile(ctx, f, unit=True)
    lam = intensity(ctx, f)
    tails = poisson_tail(ctx.max_threshold, lam)
    return np.einsum("ks,ks->s", ctx.measure.densities, tails)


def marginal_density(ctx: OperatorContext, f: np.ndarray) -> np.ndarray:
    """Density of vertices sitting one infected neighbor short of their threshold.

    V(s) = sum_{k>=1} eta_k(s) * pmf(k-1, intensity(f)(s)); multiplying by an
    intensity increment gives the first-order response of infection_map.
    """
    lam = intensity(ctx, _check_profile(ctx, f, unit=True))
    out = np.zeros_like(lam)
    for k in range(1, ctx.max_threshold + 1):
        out += ctx.measure.densities[k] * poisson_pmf(k - 1, lam)
    return out


def infection_map_derivative(ctx: OperatorContext, f: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Directional derivative of infection_map at f in direction h.

    out(s) = intensity(h)(s) * V(s); linear and non-negative in h >= 0.
    """
    h = _check_profile(ctx, h, unit=False)
    return intensity(ctx, h) * marginal_density(ctx, f)


def derivative_matrix(ctx: OperatorContext, f: np.ndarray) -> np.ndarray:
    """Dense matrix A of h -> infection_map_derivative(ctx, f, h).

    A[m, i] = k(x_i, x_m) * w(i) * V(m), so A @ h equals the directional
    derivative for every h.
    """
    v = marginal_density(ctx, f)
    return v[:, None] * (ctx.kernel_matrix * ctx.grid.weights[:, None]).T

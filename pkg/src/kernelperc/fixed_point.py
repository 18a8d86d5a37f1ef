"""Minimal fixed point of the infection map.

The reference solver iterates the infection map from the zero profile. The
map is monotone and its iterates from zero increase pointwise, staying below
every fixed point, so the limit is the pointwise-minimal fixed point; its
integral against mu is the predicted asymptotic infected fraction.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConvergenceError
from .model import KernelModel, make_step_kernels
from .operators import (
    OperatorContext,
    derivative_matrix,
    infection_map,
)

__all__ = [
    "DerivativeCondition",
    "FixedPointResult",
    "SandwichLevel",
    "solve_picard",
    "coupling_sandwich",
    "check_derivative_condition",
]

DEFAULT_TOLERANCE = 1e-10
DEFAULT_MAX_ITERATIONS = 10_000

# Spectral radius estimates this close to 1 are treated as undecidable.
_SPECTRAL_BAND = 1e-3
_POWER_STEPS = 50


@dataclass(frozen=True)
class DerivativeCondition:
    """Outcome of the stability check at a fixed point.

    ``margin`` is sup over cells of (derivative of the infection map applied
    to ``direction``) minus ``direction``; a negative margin certifies the
    contraction condition with slack -margin.
    """

    status: str  # "satisfied" | "violated" | "inconclusive"
    direction: np.ndarray
    margin: float
    spectral_radius: float | None = None


@dataclass(frozen=True)
class FixedPointResult:
    f_hat: np.ndarray
    integral: float
    iterations: int
    residual: float
    derivative_condition: DerivativeCondition
    tail_mass: float = 0.0


@dataclass(frozen=True)
class SandwichLevel:
    level: int
    lower_integral: float
    upper_integral: float

    @property
    def width(self) -> float:
        return self.upper_integral - self.lower_integral


def check_derivative_condition(ctx: OperatorContext, f_hat: np.ndarray) -> DerivativeCondition:
    """Decide whether the derivative at f_hat contracts some positive direction.

    Tries the constant direction first; if that fails, power-iterates the
    linearization to its dominant direction and decides by the spectral
    radius estimate, reporting inconclusive inside a narrow band around 1.
    Deterministic: both candidate directions start from the constant one.
    """
    a = derivative_matrix(ctx, f_hat)
    ones = np.ones(ctx.grid.cell_count)
    margin_ones = float(np.max(a @ ones - ones))
    if margin_ones < 0:
        return DerivativeCondition("satisfied", ones, margin_ones)

    h = ones
    rho = 0.0
    for _ in range(_POWER_STEPS):
        ah = a @ h
        rho = float(np.max(np.abs(ah)))
        if rho == 0.0:
            return DerivativeCondition("satisfied", h, -1.0, spectral_radius=0.0)
        h = ah / rho
    margin = float(np.max(a @ h - h))
    if abs(rho - 1.0) <= _SPECTRAL_BAND:
        return DerivativeCondition("inconclusive", h, margin, spectral_radius=rho)
    if rho < 1.0 and margin < 0:
        return DerivativeCondition("satisfied", h, margin, spectral_radius=rho)
    if rho > 1.0:
        return DerivativeCondition("violated", h, margin, spectral_radius=rho)
    return DerivativeCondition("inconclusive", h, margin, spectral_radius=rho)


class _TraceWriter:
    def __init__(self, path: str | Path | None):
        self._fh = None
        if path is not None:
            self._fh = Path(path).open("w", newline="")
            self._writer = csv.writer(self._fh)
            self._fh.write("# kernelperc convergence trace schema v1\n")
            self._writer.writerow(["iteration", "residual", "integral"])

    def row(self, iteration: int, residual: float, integral: float):
        if self._fh is not None:
            self._writer.writerow([iteration, f"{residual:.17g}", f"{integral:.17g}"])

    def close(self):
        if self._fh is not None:
            self._fh.close()


def solve_picard(
    ctx: OperatorContext,
    tolerance: float = DEFAULT_TOLERANCE,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    trace_path: str | Path | None = None,
) -> FixedPointResult:
    """Minimal fixed point by monotone iteration from the zero profile.

    Stops once the sup-norm step drops below ``tolerance`` and the residual
    of one further application confirms it. Iterates are checked to be
    pointwise non-decreasing at every step.
    """
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    trace = _TraceWriter(trace_path)
    f = np.zeros(ctx.grid.cell_count)
    productive = 0
    applications = 0
    try:
        while applications < max_iterations:
            g = infection_map(ctx, f)
            applications += 1
            if np.any(g < f - 1e-12):
                raise ArithmeticError("iterates stopped increasing; operator is not monotone")
            step = float(np.max(np.abs(g - f)))
            trace.row(applications, step, ctx.grid.integrate(g))
            f = g
            if step < tolerance:
                residual = float(np.max(np.abs(infection_map(ctx, f) - f)))
                if residual < tolerance:
                    return FixedPointResult(
                        f_hat=f,
                        integral=ctx.grid.integrate(f),
                        iterations=productive,
                        residual=residual,
                        derivative_condition=check_derivative_condition(ctx, f),
                        tail_mass=ctx.measure.tail_mass,
                    )
            productive += 1
        residual = float(np.max(np.abs(infection_map(ctx, f) - f)))
        raise ConvergenceError(
            f"no fixed point to tolerance {tolerance:g} within {max_iterations} iterations "
            f"(residual {residual:.3e})",
            last=f,
            residual=residual,
        )
    finally:
        trace.close()


def coupling_sandwich(
    ctx: OperatorContext,
    levels: Sequence[int],
    tolerance: float = DEFAULT_TOLERANCE,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> list[SandwichLevel]:
    """Bracket the fixed-point integral between step-kernel envelopes.

    For each level the kernel is replaced by its blockwise lower and upper
    envelopes; monotonicity of the infection map in the kernel makes the two
    integrals a widening-free bracket that tightens as levels refine.
    """
    if list(levels) != sorted(levels):
        raise ValueError("levels must be ascending")
    if not isinstance(ctx.kernel, KernelModel):
        raise ValueError("sandwich requires an evaluable base kernel, not a step kernel")
    out = []
    for level in levels:
        upper, lower = make_step_kernels(ctx.kernel, ctx.grid, level)
        low = solve_picard(
            OperatorContext(ctx.grid, lower, ctx.measure), tolerance, max_iterations
        )
        high = solve_picard(
            OperatorContext(ctx.grid, upper, ctx.measure), tolerance, max_iterations
        )
        out.append(SandwichLevel(level, low.integral, high.integral))
    return out

"""Resilience of an uninfected graph to vanishing seed infections.

The linearization of the infection map at the zero profile is the positive
linear operator h -> intensity(h) * eta_1. Its spectral radius decides
whether infinitesimal seeds amplify (non-resilient) or die out (resilient);
the dominant direction doubles as the pointwise witness the classification
is cross-checked against.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .operators import OperatorContext

__all__ = ["ResilienceVerdict", "derivative_at_zero", "classify", "classify_context"]

DEFAULT_BAND = 1e-3
DEFAULT_POWER_STEPS = 200


@dataclass(frozen=True)
class ResilienceVerdict:
    spectral_radius: float
    eigen_direction: np.ndarray
    verdict: str  # "resilient" | "non_resilient" | "inconclusive"
    margin: float

    def to_json(self, grid_size: int, kernel_name: str) -> str:
        return json.dumps(
            {
                "schema_version": 1,
                "spectral_radius": self.spectral_radius,
                "verdict": self.verdict,
                "margin": self.margin,
                "grid_size": grid_size,
                "kernel_name": kernel_name,
            },
            indent=2,
        )


def derivative_at_zero(ctx: OperatorContext) -> np.ndarray:
    """Matrix of the linearized infection map at the zero profile.

    Requires an uninfected measure (no threshold-0 mass). Entry (m, i) is
    k(x_i, x_m) * w(i) * eta_1(x_m), so applying the matrix to h matches the
    directional derivative at zero.
    """
    if np.any(ctx.measure.densities[0] != 0):
        raise ValueError("uninfected graph required: threshold-0 density must vanish")
    eta1 = (
        ctx.measure.densities[1]
        if ctx.measure.max_threshold >= 1
        else np.zeros(ctx.grid.cell_count)
    )
    return eta1[:, None] * (ctx.kernel_matrix * ctx.grid.weights[:, None]).T


def classify(
    map_matrix: np.ndarray,
    tolerance_band: float = DEFAULT_BAND,
    power_steps: int = DEFAULT_POWER_STEPS,
) -> ResilienceVerdict:
    """Classify a positive linear map by its spectral radius.

    Power iteration from the constant direction with sup-norm normalization;
    the verdict additionally requires the pointwise inequality (A h vs h,
    with slack ``tolerance_band``) to agree on the final direction, and
    degrades to inconclusive otherwise or inside the band around 1.
    """
    a = np.asarray(map_matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("map must be a square matrix")
    if np.any(a < 0):
        raise ValueError("map must be entrywise non-negative")

    h = np.ones(a.shape[0])
    rho = 0.0
    for _ in range(power_steps):
        ah = a @ h
        rho = float(ah.max())
        if rho == 0.0:
            return ResilienceVerdict(0.0, h, "resilient", 1.0)
        h = ah / rho

    margin = abs(rho - 1.0)
    if rho > 1.0 + tolerance_band:
        amplifies = bool(np.all(a @ h > h - tolerance_band))
        verdict = "non_resilient" if amplifies else "inconclusive"
    elif rho < 1.0 - tolerance_band:
        contracts = bool(np.all(a @ h < h + tolerance_band))
        verdict = "resilient" if contracts else "inconclusive"
    else:
        verdict = "inconclusive"
    return ResilienceVerdict(rho, h, verdict, margin)


def classify_context(
    ctx: OperatorContext,
    tolerance_band: float = DEFAULT_BAND,
    power_steps: int = DEFAULT_POWER_STEPS,
) -> ResilienceVerdict:
    """Classify the uninfected configuration held by an operator context."""
    return classify(derivative_at_zero(ctx), tolerance_band, power_steps)

"""Type space, measures, kernels, and grid functions.

The type space is the unit interval carrying a probability measure mu,
discretized into cells. Functions on the type space ("grid functions") are
plain numpy arrays with one value per cell; all integrals are midpoint
Riemann sums against the cell weights.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "TypeGrid",
    "KernelModel",
    "StepKernel",
    "ThresholdMeasure",
    "build_uniform_grid",
    "make_case_study_kernel",
    "make_kernel",
    "make_step_kernels",
    "make_threshold_measure",
]

# Safety factor applied when the kernel bound is inferred from midpoint values.
_BOUND_SLACK = 1.0 + 1e-6

# Thresholds above this cap are folded into tail_mass unless the caller
# overrides the cap.
DEFAULT_MAX_THRESHOLD = 64


@dataclass(frozen=True)
class TypeGrid:
    """Uniform-width discretization of [0, 1] with per-cell measure weights."""

    cell_count: int
    cell_edges: np.ndarray
    weights: np.ndarray
    midpoints: np.ndarray

    def __post_init__(self):
        if self.cell_count < 1:
            raise ValueError("cell_count must be a positive integer")
        edges = np.asarray(self.cell_edges, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if edges.shape != (self.cell_count + 1,):
            raise ValueError("cell_edges must have cell_count + 1 entries")
        if weights.shape != (self.cell_count,):
            raise ValueError("weights must have cell_count entries")
        if edges[0] != 0.0 or edges[-1] != 1.0 or np.any(np.diff(edges) <= 0):
            raise ValueError("cell_edges must increase strictly from 0 to 1")
        if np.any(weights < 0):
            raise ValueError("weights must be non-negative")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1 (probability measure)")

    def integrate(self, values: np.ndarray) -> float:
        """Midpoint-rule integral of a grid function against mu."""
        return float(np.dot(np.asarray(values, dtype=float), self.weights))

    def cell_of(self, points: np.ndarray) -> np.ndarray:
        """Cell index containing each point of [0, 1]."""
        idx = np.searchsorted(self.cell_edges, points, side="right") - 1
        return np.clip(idx, 0, self.cell_count - 1)


def build_uniform_grid(cell_count: int) -> TypeGrid:
    """Equal-width grid with uniform weights 1/cell_count."""
    if cell_count < 1:
        raise ValueError("cell_count must be a positive integer")
    edges = np.linspace(0.0, 1.0, cell_count + 1)
    edges[0], edges[-1] = 0.0, 1.0
    weights = np.full(cell_count, 1.0 / cell_count)
    midpoints = 0.5 * (edges[:-1] + edges[1:])
    return TypeGrid(cell_count, edges, weights, midpoints)


@dataclass(frozen=True)
class KernelModel:
    """Evaluable connection kernel on [0,1]^2 together with its sup bound.

    ``evaluator`` must accept broadcastable numpy arrays. Boundedness is
    checked at grid midpoints when the kernel is tabulated; continuity is
    assumed, not verified.
    """

    evaluator: Callable[[np.ndarray, np.ndarray], np.ndarray]
    bound: float
    name: str = "kernel"

    def __post_init__(self):
        if self.bound < 0:
            raise ValueError("kernel bound must be non-negative")

    def matrix(self, grid: TypeGrid) -> np.ndarray:
        """Tabulate kernel values at all midpoint pairs, entry (i, j) = k(x_i, x_j)."""
        x = grid.midpoints
        values = np.asarray(self.evaluator(x[:, None], x[None, :]), dtype=float)
        values = np.broadcast_to(values, (grid.cell_count, grid.cell_count)).copy()
        if np.any(values < 0):
            raise ValueError(f"kernel {self.name!r} is negative at some midpoint pair")
        if np.any(values > self.bound * _BOUND_SLACK):
            raise ValueError(f"kernel {self.name!r} exceeds its declared bound")
        return values


@dataclass(frozen=True)
class StepKernel:
    """Blockwise-constant kernel bracketing a base kernel from one side.

    The partition splits the grid cells into ``level`` contiguous blocks of
    equal cell count. ``side`` records whether block values were taken as the
    blockwise max ("upper") or min ("lower") of the base kernel at midpoints.
    """

    level: int
    block_values: np.ndarray
    partition: tuple[range, ...]
    side: str

    def __post_init__(self):
        if self.side not in ("upper", "lower"):
            raise ValueError("side must be 'upper' or 'lower'")
        if np.any(np.asarray(self.block_values) < 0):
            raise ValueError("block values must be non-negative")

    @property
    def bound(self) -> float:
        return float(np.max(self.block_values))

    @property
    def name(self) -> str:
        return f"step[{self.side},L={self.level}]"

    def cell_blocks(self, cell_count: int) -> np.ndarray:
        """Block index of every grid cell."""
        labels = np.empty(cell_count, dtype=int)
        for b, cells in enumerate(self.partition):
            labels[cells.start : cells.stop] = b
        return labels

    def matrix(self, grid: TypeGrid) -> np.ndarray:
        labels = self.cell_blocks(grid.cell_count)
        return self.block_values[labels[:, None], labels[None, :]]

    def block_weights(self, grid: TypeGrid) -> np.ndarray:
        """mu-mass of each partition block."""
        return np.array([grid.weights[c.start : c.stop].sum() for c in self.partition])


def make_case_study_kernel() -> KernelModel:
    """Clustered, type-increasing benchmark kernel 10*sqrt(x^2+y^2)/(1+sqrt(|x-y|))."""

    def evaluator(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return 10.0 * np.sqrt(x * x + y * y) / (1.0 + np.sqrt(np.abs(x - y)))

    return KernelModel(evaluator=evaluator, bound=10.0 * math.sqrt(2.0), name="case_study")


def _constant_kernel(c: float) -> KernelModel:
    if c < 0:
        raise ValueError("constant kernel level must be non-negative")

    def evaluator(x, y):
        return np.broadcast_to(float(c), np.broadcast_shapes(np.shape(x), np.shape(y)))

    return KernelModel(evaluator=evaluator, bound=float(c), name=f"constant:{c:g}")


def _product_kernel(coeffs: Sequence[float]) -> KernelModel:
    """Rank-one kernel phi(x)*phi(y) with phi a polynomial in x (ascending coefficients)."""
    coeffs = [float(c) for c in coeffs]

    def phi(x):
        return np.polynomial.polynomial.polyval(np.asarray(x, dtype=float), coeffs)

    probe = np.linspace(0.0, 1.0, 2049)
    values = phi(probe)
    if np.any(values < 0):
        raise ValueError("product kernel factor must be non-negative on [0,1]")
    bound = float(values.max() ** 2) * _BOUND_SLACK

    def evaluator(x, y):
        return phi(x) * phi(y)

    name = "product:" + ",".join(f"{c:g}" for c in coeffs)
    return KernelModel(evaluator=evaluator, bound=bound, name=name)


def _table_kernel(path: str | Path, grid: TypeGrid) -> KernelModel:
    """Kernel tabulated as a CSV matrix of midpoint values; nearest-cell lookup."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [row for row in csv.reader(fh) if row and not row[0].lstrip().startswith("#")]
    table = np.array([[float(v) for v in row] for row in rows])
    if table.shape != (grid.cell_count, grid.cell_count):
        raise ValueError(
            f"kernel table {path} has shape {table.shape}, expected "
            f"({grid.cell_count}, {grid.cell_count})"
        )
    if np.any(table < 0):
        raise ValueError(f"kernel table {path} contains negative entries")

    def evaluator(x, y):
        i = grid.cell_of(np.asarray(x, dtype=float))
        j = grid.cell_of(np.asarray(y, dtype=float))
        return table[i, j]

    return KernelModel(evaluator=evaluator, bound=float(table.max()) * _BOUND_SLACK, name=f"table:{path.name}")


def make_kernel(spec: str, grid: TypeGrid | None = None) -> KernelModel:
    """Build a kernel from its config-file name.

    Recognized forms: ``case_study``, ``constant:c``, ``product:c0,c1,...``
    (polynomial factor coefficients, ascending degree), ``table:<path>``.
    """
    if spec == "case_study":
        return make_case_study_kernel()
    if spec.startswith("constant:"):
        return _constant_kernel(float(spec.split(":", 1)[1]))
    if spec.startswith("product:"):
        return _product_kernel([c for c in spec.split(":", 1)[1].split(",") if c])
    if spec.startswith("table:"):
        if grid is None:
            raise ValueError("table kernels need the grid to validate their shape")
        return _table_kernel(spec.split(":", 1)[1], grid)
    raise ValueError(f"unknown kernel spec {spec!r}")


def make_step_kernels(
    kernel: KernelModel, grid: TypeGrid, level: int
) -> tuple[StepKernel, StepKernel]:
    """Blockwise upper/lower envelopes of a kernel on a level-block partition.

    The grid is split into ``level`` contiguous blocks of equal cell count;
    block values are the max (upper) and min (lower) of the kernel over all
    midpoint pairs in the block rectangle, so upper >= base >= lower at every
    midpoint pair by construction.
    """
    if level < 1:
        raise ValueError("level must be a positive integer")
    if grid.cell_count % level != 0:
        raise ValueError(
            f"level {level} does not divide the grid cell count {grid.cell_count}"
        )
    per_block = grid.cell_count // level
    base = kernel.matrix(grid)
    blocked = base.reshape(level, per_block, level, per_block)
    upper_values = blocked.max(axis=(1, 3))
    lower_values = blocked.min(axis=(1, 3))
    partition = tuple(range(b * per_block, (b + 1) * per_block) for b in range(level))
    upper = StepKernel(level, upper_values, partition, "upper")
    lower = StepKernel(level, lower_values, partition, "lower")
    return upper, lower


@dataclass(frozen=True)
class ThresholdMeasure:
    """Per-threshold densities eta_k against mu, one row per threshold k.

    Rows are normalized so the densities sum to one at every cell. When the
    caller truncated an infinite threshold family, the dropped mu-mass is
    surfaced as ``tail_mass``.
    """

    max_threshold: int
    densities: np.ndarray
    tail_mass: float = 0.0

    def __post_init__(self):
        dens = np.asarray(self.densities, dtype=float)
        if dens.ndim != 2 or dens.shape[0] != self.max_threshold + 1:
            raise ValueError("densities must have max_threshold + 1 rows")
        if np.any(dens < 0):
            raise ValueError("densities must be non-negative")
        totals = dens.sum(axis=0)
        if np.any(np.abs(totals - 1.0) > 1e-10):
            raise ValueError("densities must sum to 1 at every cell")
        if self.tail_mass < 0:
            raise ValueError("tail_mass must be non-negative")

    @property
    def cell_count(self) -> int:
        return self.densities.shape[1]

    def seed_density(self) -> np.ndarray:
        """Density of initially infected vertices (threshold 0)."""
        return self.densities[0]


def make_threshold_measure(
    spec: Sequence[tuple[int, float | np.ndarray]],
    grid: TypeGrid,
    max_threshold: int = DEFAULT_MAX_THRESHOLD,
) -> ThresholdMeasure:
    """Assemble a threshold measure from (threshold, density) pairs.

    Densities may be scalars (type-independent) or per-cell arrays. Input
    scaling is arbitrary: columns are renormalized to sum to one. Pairs with
    k > max_threshold are dropped and their mu-mass recorded as tail_mass.
    """
    if not spec:
        raise ValueError("measure spec must contain at least one threshold")
    rows: dict[int, np.ndarray] = {}
    for k, density in spec:
        k = int(k)
        if k < 0:
            raise ValueError("thresholds must be non-negative integers")
        values = np.broadcast_to(np.asarray(density, dtype=float), (grid.cell_count,)).copy()
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ValueError(f"density for threshold {k} must be finite and non-negative")
        rows[k] = rows.get(k, 0.0) + values

    kept = [k for k in rows if k <= max_threshold]
    if not kept:
        raise ValueError("all thresholds exceed the cap; nothing left to keep")
    kept_max = max(kept)
    dens = np.zeros((kept_max + 1, grid.cell_count))
    dropped = np.zeros(grid.cell_count)
    for k, values in rows.items():
        if k <= max_threshold:
            dens[k] += values
        else:
            dropped += values

    totals = dens.sum(axis=0)
    if np.any(totals <= 0):
        raise ValueError("every cell needs positive total density below the threshold cap")
    tail_mass = float(np.dot(dropped / (totals + dropped), grid.weights))
    return ThresholdMeasure(kept_max, dens / totals, tail_mass)

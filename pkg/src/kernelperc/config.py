"""Declarative experiment configuration (TOML)."""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .model import (
    KernelModel,
    ThresholdMeasure,
    TypeGrid,
    build_uniform_grid,
    make_kernel,
    make_threshold_measure,
)

__all__ = ["ExperimentConfig", "load_config", "bundled_config_path"]


@dataclass
class ExperimentConfig:
    """Parsed and validated experiment description."""

    kernel_spec: str
    measure_thresholds: list[tuple[int, float]]
    grid_cells: int
    tolerance: float = 1e-10
    max_iterations: int = 10_000
    nn_enabled: bool = False
    nn_gamma: float = 1e-3
    nn_hidden: tuple[int, ...] = (20, 20)
    nn_steps: int = 50_000
    nn_samples: int = 1000
    nn_optimizer: str = "gd"
    nn_stop: float | None = None
    nn_learning_rate: float | None = None
    nn_seed: int = 0
    trace_file: str | None = None
    sim_n: list[int] = field(default_factory=lambda: [3000])
    sim_runs: int = 200
    sim_bins: int = 1000
    base_seed: int = 7
    sandwich_levels: list[int] = field(default_factory=lambda: [10, 50, 250])
    finite_level: int = 50
    finite_side: str = "lower"
    resilience_band: float = 1e-3
    resilience_power_steps: int = 200
    output_dir: Path = Path("out")
    source: dict = field(default_factory=dict)

    def grid(self) -> TypeGrid:
        return build_uniform_grid(self.grid_cells)

    def kernel(self, grid: TypeGrid) -> KernelModel:
        return make_kernel(self.kernel_spec, grid)

    def measure(self, grid: TypeGrid) -> ThresholdMeasure:
        return make_threshold_measure(
            [(k, float(v)) for k, v in self.measure_thresholds], grid
        )


def bundled_config_path(name: str) -> Path:
    """Filesystem path of a config shipped with the package."""
    candidate = resources.files("kernelperc") / "configs" / f"{name}.toml"
    with resources.as_file(candidate) as path:
        if not path.exists():
            raise ConfigError(f"no bundled config named {name!r}")
        return Path(path)


def _require(table: dict, key: str, kind, where: str):
    if key not in table:
        raise ConfigError(f"missing {where}.{key}")
    value = table[key]
    if kind is float and isinstance(value, int):
        value = float(value)
    if not isinstance(value, kind):
        raise ConfigError(f"{where}.{key} must be of type {kind.__name__}")
    return value


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        with path.open("rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid TOML: {exc}") from exc

    kernel_tab = raw.get("kernel", {})
    kernel_spec = _require(kernel_tab, "name", str, "kernel")
    if kernel_spec.startswith("table:"):
        table_path = Path(kernel_spec.split(":", 1)[1])
        if not table_path.is_absolute():
            table_path = path.parent / table_path
            kernel_spec = f"table:{table_path}"
        if not table_path.exists():
            raise ConfigError(f"kernel table {table_path} does not exist")

    measure_tab = raw.get("measure", {})
    thresholds_raw = _require(measure_tab, "thresholds", list, "measure")
    thresholds: list[tuple[int, float]] = []
    for entry in thresholds_raw:
        if not isinstance(entry, list) or len(entry) != 2:
            raise ConfigError("measure.thresholds entries must be [k, density] pairs")
        k, dens = entry
        if not isinstance(k, int) or k < 0:
            raise ConfigError("measure.thresholds keys must be non-negative integers")
        if float(dens) < 0:
            raise ConfigError("measure.thresholds densities must be non-negative")
        thresholds.append((k, float(dens)))
    if not thresholds:
        raise ConfigError("measure.thresholds must not be empty")

    grid_tab = raw.get("grid", {})
    cells = _require(grid_tab, "cells", int, "grid")
    if cells < 1:
        raise ConfigError("grid.cells must be positive")

    cfg = ExperimentConfig(
        kernel_spec=kernel_spec,
        measure_thresholds=thresholds,
        grid_cells=cells,
        source=raw,
    )

    solver = raw.get("solver", {})
    cfg.tolerance = float(solver.get("tolerance", cfg.tolerance))
    cfg.max_iterations = int(solver.get("max_iterations", cfg.max_iterations))
    cfg.nn_enabled = bool(solver.get("nn", cfg.nn_enabled))
    cfg.nn_gamma = float(solver.get("gamma", cfg.nn_gamma))
    cfg.nn_hidden = tuple(int(h) for h in solver.get("hidden", cfg.nn_hidden))
    cfg.nn_steps = int(solver.get("nn_steps", cfg.nn_steps))
    cfg.nn_samples = int(solver.get("nn_samples", cfg.nn_samples))
    cfg.nn_optimizer = str(solver.get("nn_optimizer", cfg.nn_optimizer))
    cfg.nn_seed = int(solver.get("nn_seed", cfg.nn_seed))
    if "nn_stop" in solver:
        cfg.nn_stop = float(solver["nn_stop"])
    if "learning_rate" in solver:
        cfg.nn_learning_rate = float(solver["learning_rate"])
    if "trace" in solver:
        cfg.trace_file = str(solver["trace"])
    if cfg.tolerance <= 0 or cfg.max_iterations < 1:
        raise ConfigError("solver.tolerance must be positive and max_iterations >= 1")
    if not 0 < cfg.nn_gamma < 1:
        raise ConfigError("solver.gamma must lie in (0, 1)")
    if cfg.nn_optimizer not in ("gd", "adam"):
        raise ConfigError("solver.nn_optimizer must be 'gd' or 'adam'")

    sim = raw.get("simulation", {})
    n_value = sim.get("n", cfg.sim_n)
    cfg.sim_n = [int(n_value)] if isinstance(n_value, int) else [int(v) for v in n_value]
    cfg.sim_runs = int(sim.get("runs", cfg.sim_runs))
    cfg.sim_bins = int(sim.get("bins", cfg.sim_bins))
    cfg.base_seed = int(sim.get("base_seed", cfg.base_seed))
    if any(n < 2 for n in cfg.sim_n) or cfg.sim_runs < 1 or cfg.sim_bins < 1:
        raise ConfigError("simulation.n entries must be >= 2, runs and bins >= 1")

    sandwich = raw.get("sandwich", {})
    cfg.sandwich_levels = [int(v) for v in sandwich.get("levels", cfg.sandwich_levels)]
    if cfg.sandwich_levels != sorted(cfg.sandwich_levels):
        raise ConfigError("sandwich.levels must be ascending")

    finite = raw.get("finite", {})
    cfg.finite_level = int(finite.get("level", cfg.finite_level))
    cfg.finite_side = str(finite.get("side", cfg.finite_side))
    if cfg.finite_side not in ("lower", "upper"):
        raise ConfigError("finite.side must be 'lower' or 'upper'")

    res = raw.get("resilience", {})
    cfg.resilience_band = float(res.get("band", cfg.resilience_band))
    cfg.resilience_power_steps = int(res.get("power_steps", cfg.resilience_power_steps))

    out = raw.get("output", {})
    directory = out.get("directory", str(cfg.output_dir))
    cfg.output_dir = Path(directory)
    return cfg

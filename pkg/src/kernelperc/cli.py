"""Command-line front end.

Subcommands run one experiment each from a declarative TOML config and write
versioned CSV/JSON artifacts into the output directory, echoing the fully
resolved config alongside them. Exit codes: 0 success, 2 config error,
3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, load_config
from .errors import ConfigError, ConvergenceError
from .fixed_point import coupling_sandwich, solve_picard
from .finite_type import first_joint_zero, stability_margin, system_from_step_kernel
from .model import make_step_kernels
from .nn_solver import NeuralApproximator, solve_nn
from .operators import OperatorContext
from .oracle import oracle_for_config
from .resilience import classify_context
from .simulator import monte_carlo, write_bins_csv, write_runs_csv

SCHEMA_VERSION = 1


def _echo_config(cfg: ExperimentConfig, out_dir: Path) -> None:
    resolved = dataclasses.asdict(cfg)
    resolved["output_dir"] = str(cfg.output_dir)
    with (out_dir / "config.json").open("w") as fh:
        json.dump({"schema_version": SCHEMA_VERSION, "config": resolved}, fh, indent=2, default=str)


def _context(cfg: ExperimentConfig) -> OperatorContext:
    grid = cfg.grid()
    return OperatorContext(grid, cfg.kernel(grid), cfg.measure(grid))


def _write_json(path: Path, payload: dict) -> None:
    payload = {"schema_version": SCHEMA_VERSION, **payload}
    with path.open("w") as fh:
        json.dump(payload, fh, indent=2)


def cmd_solve(cfg: ExperimentConfig, out_dir: Path) -> int:
    ctx = _context(cfg)
    result = solve_picard(ctx, cfg.tolerance, cfg.max_iterations)
    payload = {
        "integral": result.integral,
        "residual": result.residual,
        "iterations": result.iterations,
        "tail_mass": result.tail_mass,
        "derivative_condition": {
            "status": result.derivative_condition.status,
            "margin": result.derivative_condition.margin,
            "spectral_radius": result.derivative_condition.spectral_radius,
        },
    }
    if cfg.nn_enabled:
        net = NeuralApproximator.create(cfg.nn_hidden, cfg.nn_gamma, seed=cfg.nn_seed)
        nn_result = solve_nn(
            ctx,
            net,
            learning_rate=cfg.nn_learning_rate,
            stop_epsilon=cfg.nn_stop,
            max_steps=cfg.nn_steps,
            sample_count=cfg.nn_samples,
            seed=cfg.nn_seed,
            optimizer=cfg.nn_optimizer,
        )
        payload["nn"] = {
            "integral": nn_result.integral,
            "residual": nn_result.residual,
            "steps": nn_result.iterations,
        }
        _write_fhat(out_dir / "fnn.csv", ctx, nn_result.f_hat)
    _write_json(out_dir / "fixedpoint.json", payload)
    _write_fhat(out_dir / "fhat.csv", ctx, result.f_hat)
    return 0


def _write_fhat(path: Path, ctx: OperatorContext, values: np.ndarray) -> None:
    with path.open("w", newline="") as fh:
        fh.write("# kernelperc fixed-point profile schema v1\n")
        writer = csv.writer(fh)
        writer.writerow(["midpoint", "value"])
        for x, v in zip(ctx.grid.midpoints, values):
            writer.writerow([f"{x:.17g}", f"{v:.17g}"])


def cmd_simulate(cfg: ExperimentConfig, out_dir: Path, threads: int) -> int:
    ctx = _context(cfg)
    fhat = solve_picard(ctx, cfg.tolerance, cfg.max_iterations).f_hat
    per_n = {}
    for n in cfg.sim_n:
        summary = monte_carlo(
            ctx.kernel,
            ctx.measure,
            ctx.grid,
            n=n,
            runs=cfg.sim_runs,
            base_seed=cfg.base_seed,
            bins=cfg.sim_bins,
            workers=threads,
        )
        suffix = f"_n{n}" if len(cfg.sim_n) > 1 else ""
        write_runs_csv(out_dir / f"runs{suffix}.csv", summary)
        centers = 0.5 * (summary.bin_edges[:-1] + summary.bin_edges[1:])
        fhat_at_bins = fhat[ctx.grid.cell_of(centers)]
        write_bins_csv(out_dir / f"bins{suffix}.csv", summary, fhat_at_bins)
        per_n[str(n)] = {
            "mean": summary.mean_fraction,
            "std": summary.std_fraction,
            "min": summary.min_fraction,
            "max": summary.max_fraction,
            "runs": summary.runs,
        }
    _write_json(out_dir / "summary.json", {"results": per_n})
    return 0


def cmd_sandwich(cfg: ExperimentConfig, out_dir: Path) -> int:
    ctx = _context(cfg)
    base = solve_picard(ctx, cfg.tolerance, cfg.max_iterations).integral
    levels = coupling_sandwich(ctx, cfg.sandwich_levels, cfg.tolerance, cfg.max_iterations)
    _write_json(
        out_dir / "sandwich.json",
        {
            "base_integral": base,
            "levels": [
                {
                    "level": s.level,
                    "lower_integral": s.lower_integral,
                    "upper_integral": s.upper_integral,
                    "width": s.width,
                }
                for s in levels
            ],
        },
    )
    return 0


def cmd_finite(cfg: ExperimentConfig, out_dir: Path) -> int:
    ctx = _context(cfg)
    upper, lower = make_step_kernels(ctx.kernel, ctx.grid, cfg.finite_level)
    step = upper if cfg.finite_side == "upper" else lower
    system = system_from_step_kernel(step, ctx.grid, ctx.measure)
    z_hat, tau_hat = first_joint_zero(system, tolerance=min(cfg.tolerance, 1e-12))
    margin = stability_margin(system, z_hat)
    _write_json(
        out_dir / "finite.json",
        {
            "level": cfg.finite_level,
            "side": cfg.finite_side,
            "tau_hat": tau_hat,
            "stability_margin": margin,
            "z_hat": list(z_hat),
        },
    )
    return 0


def cmd_resilience(cfg: ExperimentConfig, out_dir: Path) -> int:
    ctx = _context(cfg)
    verdict = classify_context(ctx, cfg.resilience_band, cfg.resilience_power_steps)
    (out_dir / "resilience.json").write_text(
        verdict.to_json(grid_size=cfg.grid_cells, kernel_name=cfg.kernel_spec)
    )
    return 0


def cmd_oracle(cfg: ExperimentConfig, out_dir: Path) -> int:
    try:
        record = oracle_for_config(cfg.kernel_spec, cfg.measure_thresholds, cfg.grid_cells)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    _write_json(out_dir / "oracle.json", record)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="kernelperc",
        description="Percolation cascades on kernel random graphs: solve, simulate, classify.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("solve", "compute the minimal fixed point and its integral"),
        ("simulate", "Monte Carlo percolation runs on sampled graphs"),
        ("finite", "finite-type closed-form cascade at a step-kernel level"),
        ("sandwich", "bracket the fixed-point integral between step kernels"),
        ("resilience", "classify the uninfected configuration"),
        ("oracle", "record scalar-oracle values for scalar-reducible configs"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="experiment config (TOML)")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        p.add_argument("--seed", type=int, default=None, help="override the base seed")
        p.add_argument("--threads", type=int, default=1, help="parallel Monte Carlo workers")

    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.base_seed = args.seed
            cfg.nn_seed = args.seed
        out_dir = Path(args.out) if args.out else cfg.output_dir
        out_dir.mkdir(parents=True, exist_ok=True)
        _echo_config(cfg, out_dir)
        if args.command == "solve":
            return cmd_solve(cfg, out_dir)
        if args.command == "simulate":
            return cmd_simulate(cfg, out_dir, args.threads)
        if args.command == "sandwich":
            return cmd_sandwich(cfg, out_dir)
        if args.command == "finite":
            return cmd_finite(cfg, out_dir)
        if args.command == "resilience":
            return cmd_resilience(cfg, out_dir)
        if args.command == "oracle":
            return cmd_oracle(cfg, out_dir)
        raise AssertionError(f"unhandled command {args.command}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ConvergenceError, ArithmeticError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

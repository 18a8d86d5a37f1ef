"""Bootstrap percolation on kernel-based inhomogeneous random graphs.

Computes the asymptotic infected fraction as the minimal fixed point of a
monotone integral operator, classifies resilience through the linearization
at zero, and validates both against exact Monte Carlo cascades on finite
sampled graphs.
"""

__version__ = "0.1.0"

from .errors import ConfigError, ConvergenceError
from .fixed_point import (
    DerivativeCondition,
    FixedPointResult,
    SandwichLevel,
    coupling_sandwich,
    solve_picard,
)
from .finite_type import (
    FiniteTypeSystem,
    embed_step_function,
    first_joint_zero,
    stability_margin,
    state_masses,
    system_from_step_kernel,
)
from .model import (
    KernelModel,
    StepKernel,
    ThresholdMeasure,
    TypeGrid,
    build_uniform_grid,
    make_case_study_kernel,
    make_kernel,
    make_step_kernels,
    make_threshold_measure,
)
from .nn_solver import NeuralApproximator, solve_nn
from .operators import (
    OperatorContext,
    infection_map,
    infection_map_derivative,
    intensity,
    poisson_pmf,
    poisson_tail,
)
from .resilience import ResilienceVerdict, classify, classify_context, derivative_at_zero
from .simulator import (
    MonteCarloSummary,
    PercolationGraph,
    SimulationRecord,
    monte_carlo,
    run_percolation,
    sample_graph,
)

__all__ = [
    "ConfigError",
    "ConvergenceError",
    "DerivativeCondition",
    "FixedPointResult",
    "SandwichLevel",
    "FiniteTypeSystem",
    "KernelModel",
    "StepKernel",
    "ThresholdMeasure",
    "TypeGrid",
    "OperatorContext",
    "NeuralApproximator",
    "MonteCarloSummary",
    "PercolationGraph",
    "SimulationRecord",
    "ResilienceVerdict",
    "build_uniform_grid",
    "make_case_study_kernel",
    "make_kernel",
    "make_step_kernels",
    "make_threshold_measure",
    "intensity",
    "poisson_pmf",
    "poisson_tail",
    "infection_map",
    "infection_map_derivative",
    "solve_picard",
    "solve_nn",
    "coupling_sandwich",
    "state_masses",
    "first_joint_zero",
    "stability_margin",
    "embed_step_function",
    "system_from_step_kernel",
    "sample_graph",
    "run_percolation",
    "monte_carlo",
    "derivative_at_zero",
    "classify",
    "classify_context",
]

"""Sparse recovery with modified lp-norm iterative thresholding."""

from lpthresh.linalg import (
    DenseMatrix,
    matvec,
    matvec_transpose,
    nonincreasing_rearrangement,
    spectral_norm,
)
from lpthresh.penalty import (
    PenaltyParams,
    modified_penalty,
    objective_h1,
    surrogate_h2,
)
from lpthresh.problems import ProblemInstance, generate_instance, load_instance, save_instance
from lpthresh.solvers import (
    Algorithm,
    SolveResult,
    SolverConfig,
    Termination,
    adaptive_lambda,
    compute_epsilon,
    gradient_step,
    relative_error,
    solve,
)
from lpthresh.thresholds import half_threshold, it_coordinate_update, soft_threshold

__version__ = "0.1.0"

__all__ = [
    "Algorithm",
    "DenseMatrix",
    "PenaltyParams",
    "ProblemInstance",
    "SolveResult",
    "SolverConfig",
    "Termination",
    "adaptive_lambda",
    "compute_epsilon",
    "generate_instance",
    "gradient_step",
    "half_threshold",
    "it_coordinate_update",
    "load_instance",
    "matvec",
    "matvec_transpose",
    "modified_penalty",
    "nonincreasing_rearrangement",
    "objective_h1",
    "relative_error",
    "save_instance",
    "soft_threshold",
    "solve",
    "spectral_norm",
    "surrogate_h2",
]

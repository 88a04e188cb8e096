"""Sketched Levenberg-Marquardt for nonlinear least squares with adaptive sketch size."""

from .cost import CostLedger, charge_iteration
from .problems import (
    AugmentedProblem,
    ClassificationProblem,
    FunctionProblem,
    LinearProblem,
    NlsProblem,
    ShiftedProblem,
    builtin_problem,
    classification_accuracy,
    eval_gradient,
    eval_merit,
    make_augmented,
)
from .sketching import SketchOperator, draw, operator_norm_bound, recommended_ell
from .solver import IterationRecord, SolveOutcome, SolverConfig, hitting_time, solve
from .subproblem import SubproblemResult, build_and_solve, check_nu_bounds, theta_star

__version__ = "0.1.0"

__all__ = [
    "AugmentedProblem",
    "ClassificationProblem",
    "CostLedger",
    "FunctionProblem",
    "IterationRecord",
    "LinearProblem",
    "NlsProblem",
    "ShiftedProblem",
    "SketchOperator",
    "SolveOutcome",
    "SolverConfig",
    "SubproblemResult",
    "build_and_solve",
    "builtin_problem",
    "charge_iteration",
    "check_nu_bounds",
    "classification_accuracy",
    "draw",
    "eval_gradient",
    "eval_merit",
    "hitting_time",
    "make_augmented",
    "operator_norm_bound",
    "recommended_ell",
    "solve",
    "theta_star",
]

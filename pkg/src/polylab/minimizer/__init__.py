"""Constrained minimization of the discrete energy and the sequence experiments."""

from .objective import BodyForce, Constraints, ObjectiveValue, assemble_gradient, evaluate, objective_value
from .solver import InfeasibleStartError, LineSearchError, MinimizationTrace, MinimizerConfig, minimize
from .step import STEP_CAP, det_polynomial, max_feasible_step, max_feasible_step_from_gradients

__all__ = [
    "BodyForce",
    "Constraints",
    "InfeasibleStartError",
    "LineSearchError",
    "MinimizationTrace",
    "MinimizerConfig",
    "ObjectiveValue",
    "STEP_CAP",
    "assemble_gradient",
    "det_polynomial",
    "evaluate",
    "max_feasible_step",
    "max_feasible_step_from_gradients",
    "minimize",
    "objective_value",
]

from .experiments import (  # noqa: E402
    QuasiconvexityResult,
    SemicontinuityTable,
    quasiconvexity_affine_test,
    random_interior_perturbation,
    semicontinuity_experiment,
)

__all__ += [
    "QuasiconvexityResult",
    "SemicontinuityTable",
    "quasiconvexity_affine_test",
    "random_interior_perturbation",
    "semicontinuity_experiment",
]

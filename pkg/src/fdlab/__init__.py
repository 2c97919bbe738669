"""Numerical laboratory for the doubly nonlinear Finsler diffusion equation
``d/dt (|u|^{q-2} u) = Delta_H u`` with growing initial data."""
from .norms import FinslerEvaluator, NormSpec
from .disc import Grid, build_grid, finsler_laplacian
from .stepper import RunResult, StepConfig, Status, run
from .exact import zkb_params, zkb_eval

__all__ = [
    "FinslerEvaluator",
    "NormSpec",
    "Grid",
    "build_grid",
    "finsler_laplacian",
    "RunResult",
    "StepConfig",
    "Status",
    "run",
    "zkb_params",
    "zkb_eval",
]

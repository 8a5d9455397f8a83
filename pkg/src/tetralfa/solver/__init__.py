"""Structured geometric multigrid used to validate the Fourier predictions."""

from .kernels import BACKEND, available_backends, get_backend
from .multigrid import (
    CycleConfig,
    CycleResult,
    DivergenceError,
    GridLevel,
    Hierarchy,
    SolverError,
    apply_operator,
    measure_vs_prediction,
    prolong,
    relax,
    residual,
    restrict,
    run_cycles,
)

__all__ = [
    "BACKEND",
    "available_backends",
    "get_backend",
    "CycleConfig",
    "CycleResult",
    "DivergenceError",
    "GridLevel",
    "Hierarchy",
    "SolverError",
    "apply_operator",
    "measure_vs_prediction",
    "prolong",
    "relax",
    "residual",
    "restrict",
    "run_cycles",
]

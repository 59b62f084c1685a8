"""Solver engines, configuration and diagnostics."""

from .config import AUTO, PenaltySchedule, SolverConfig, Status, Variant
from .diagnostics import ergodic_average, ergodic_weights, fejer_diagnostic, optimality_measure, rate_alpha
from .problem import BlockSpec, LiftInfo, Problem
from .solver import (
    BlockParams,
    SolveReport,
    SolverState,
    StoppingCheck,
    Trace,
    check_stopping,
    compute_lambda_hat,
    resolve_params,
    solve,
    solve_naive_ladm,
    update_beta,
    update_blocks_parallel,
    update_lambda,
)

__all__ = [
    "AUTO",
    "PenaltySchedule",
    "SolverConfig",
    "Status",
    "Variant",
    "BlockSpec",
    "LiftInfo",
    "Problem",
    "BlockParams",
    "SolveReport",
    "SolverState",
    "StoppingCheck",
    "Trace",
    "check_stopping",
    "compute_lambda_hat",
    "resolve_params",
    "solve",
    "solve_naive_ladm",
    "update_beta",
    "update_blocks_parallel",
    "update_lambda",
    "ergodic_average",
    "ergodic_weights",
    "fejer_diagnostic",
    "optimality_measure",
    "rate_alpha",
]

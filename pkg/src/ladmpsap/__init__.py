"""Linearized ADM with parallel splitting and adaptive penalty for
multi-block separable convex programs."""

from .core import (
    BlockSpec,
    PenaltySchedule,
    Problem,
    SolverConfig,
    SolveReport,
    Status,
    Variant,
    solve,
    solve_naive_ladm,
)

__version__ = "0.1.0"

__all__ = [
    "BlockSpec",
    "PenaltySchedule",
    "Problem",
    "SolverConfig",
    "SolveReport",
    "Status",
    "Variant",
    "solve",
    "solve_naive_ladm",
]

"""Independent reference solutions used by the tests and the experiment runner.

Nothing in here is used by the solver itself.  The references are built
with deliberately different machinery (a dense linear solve, brute-force
grid scans, a generic conic solver) so that agreement is meaningful.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass

import numpy as np

from .core.config import PenaltySchedule, SolverConfig, Status
from .core.problem import Problem
from .core.solver import solve
from .exceptions import InvalidInputError, NumericError, RankDeficiencyError, UnsupportedError
from .proxlib import (
    GroupL2,
    Indicator,
    L1Norm,
    NonnegativeCone,
    NuclearNorm,
    ShiftedSquare,
    SquaredFrobenius,
    Term,
    ZeroTerm,
)

__all__ = [
    "ReferenceSource",
    "KktReference",
    "eq_qp_solve",
    "kkt_residuals",
    "prox_grid_oracle",
    "long_run_reference",
]

log = logging.getLogger(__name__)

GRID_MAX_DIM = 6


class ReferenceSource(str, enum.Enum):
    CLOSED_FORM = "closed_form"
    LONG_RUN = "long_run"
    GRID_SEARCH = "grid_search"


@dataclass
class KktReference:
    """A (near) KKT pair ``(x*, lam*)`` with ``-A_i^T lam* in df_i(x_i*)``.

    `feasibility` is the relative residual ``||sum_i A_i x_i* - b|| / max(||b||, 1)``
    actually attained.
    """

    x_star: list
    lambda_star: np.ndarray
    source: ReferenceSource
    feasibility: float = 0.0
    iterations: int = 0


def _quadratic_data(term: Term, shape):
    """``(scale, center)`` for terms of the form ``scale/2 ||x - center||^2``."""
    if isinstance(term, ShiftedSquare):
        center = np.broadcast_to(term.center, shape).astype(float)
        return term.scale, center
    if isinstance(term, SquaredFrobenius):
        return 1.0 / term.mu, np.zeros(shape)
    raise InvalidInputError(f"eq_qp_solve needs quadratic terms, got {type(term).__name__}")


def eq_qp_solve(problem: Problem, tol: float = 1e-10) -> KktReference:
    """Solve the KKT system of an equality-constrained quadratic problem directly.

    Every term must be ``scale/2 ||x_i - c_i||^2``.  The system

    .. math::

        \\begin{pmatrix} D & A^T \\\\ A & 0 \\end{pmatrix}
        \\begin{pmatrix} x \\\\ \\lambda \\end{pmatrix}
        = \\begin{pmatrix} D c \\\\ b \\end{pmatrix}

    is assembled from dense matrices of the maps and solved by LU.

    Raises
    ------
    RankDeficiencyError
        If the KKT matrix is singular, or the solve leaves a residual above
        `tol` (relative to the data).
    """
    sizes = [blk.linmap.input_size for blk in problem.blocks]
    N, m = sum(sizes), problem.rhs.size
    D = np.zeros(N)
    c = np.zeros(N)
    A = np.zeros((m, N))
    off = 0
    for blk, sz in zip(problem.blocks, sizes):
        scale, center = _quadratic_data(blk.term, blk.shape)
        D[off : off + sz] = scale
        c[off : off + sz] = center.ravel()
        A[:, off : off + sz] = blk.linmap.to_matrix()
        off += sz
    K = np.block([[np.diag(D), A.T], [A, np.zeros((m, m))]])
    rhs = np.concatenate([D * c, problem.rhs.ravel()])
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError as exc:
        raise RankDeficiencyError(f"singular KKT system ({K.shape[0]} unknowns): {exc}") from exc
    scale = max(1.0, float(np.abs(rhs).max()))
    if not np.all(np.isfinite(sol)) or np.abs(K @ sol - rhs).max() > tol * scale:
        raise RankDeficiencyError("KKT system is numerically singular")

    x_star, off = [], 0
    for blk, sz in zip(problem.blocks, sizes):
        x_star.append(sol[off : off + sz].reshape(blk.shape))
        off += sz
    lam = sol[N:].reshape(problem.rhs.shape)
    feas = float(np.linalg.norm(problem.residual(x_star))) / max(float(np.linalg.norm(problem.rhs)), 1.0)
    return KktReference(x_star, lam, ReferenceSource.CLOSED_FORM, feasibility=feas)


def kkt_residuals(problem: Problem, reference: KktReference) -> tuple[float, float]:
    """``(stationarity, feasibility)`` max-norm residuals for smooth terms.

    Stationarity is ``max_i ||grad f_i(x_i*) + A_i^T lam*||_inf``, so only
    terms with a gradient are supported.
    """
    stat = 0.0
    for blk, xs in zip(problem.blocks, reference.x_star):
        if not blk.term.smooth:
            raise UnsupportedError("stationarity residual needs differentiable terms")
        g = blk.term.gradient(xs) + blk.linmap.adjoint(reference.lambda_star)
        stat = max(stat, float(np.abs(g).max()))
    feas = float(np.abs(problem.residual(reference.x_star)).max())
    return stat, feas


def _elementwise(term: Term, shape):
    """Vectorized per-coordinate value ``phi_j(t)`` of a separable term, or ``None``."""
    if isinstance(term, ZeroTerm):
        return lambda t, j: np.zeros_like(t)
    if isinstance(term, L1Norm):
        return lambda t, j: term.weight * np.abs(t)
    if isinstance(term, SquaredFrobenius):
        return lambda t, j: t**2 / (2.0 * term.mu)
    if isinstance(term, ShiftedSquare):
        center = np.broadcast_to(term.center, shape).ravel()
        return lambda t, j: 0.5 * term.scale * (t - center[j]) ** 2
    if isinstance(term, Indicator) and isinstance(term.convex_set, NonnegativeCone):
        return lambda t, j: np.where(t >= 0, 0.0, np.inf)
    return None


def _anchor(term: Term, shape):
    """Point the prox moves toward, coordinate-wise; bounds the scan interval."""
    if isinstance(term, ShiftedSquare):
        return np.broadcast_to(term.center, shape).ravel()
    return np.zeros(int(np.prod(shape)))


def prox_grid_oracle(term: Term, sigma: float, w, step: float = 1e-4) -> np.ndarray:
    """Brute-force ``argmin_x term(x) + sigma/2 ||x - w||^2``.

    Separable terms are scanned one coordinate at a time on a uniform grid
    of spacing `step` that brackets the minimizer.  Group-l2 terms are
    scanned radially along each group's direction.  Small non-separable
    terms (nuclear norm, at most ``GRID_MAX_DIM`` entries) go to a generic
    conic solver.  The result is within `step` of the exact minimizer in
    the scanned cases.

    Raises
    ------
    UnsupportedError
        For non-separable terms in higher dimension, or unknown terms.
    """
    w = np.asarray(w, dtype=float)
    if sigma <= 0 or step <= 0:
        raise InvalidInputError("sigma and step must be positive")

    phi = _elementwise(term, w.shape)
    if phi is not None:
        flat = w.ravel()
        anchor = _anchor(term, w.shape)
        out = np.empty_like(flat)
        for j, wj in enumerate(flat):
            lo, hi = min(wj, anchor[j]) - step, max(wj, anchor[j]) + step
            grid = np.arange(lo, hi + step, step)
            obj = phi(grid, j) + 0.5 * sigma * (grid - wj) ** 2
            out[j] = grid[np.argmin(obj)]
        return out.reshape(w.shape)

    if isinstance(term, GroupL2):
        flat = w.ravel()
        out = np.zeros_like(flat)
        start = 0
        for size in term.group_sizes:
            seg = flat[start : start + size]
            nrm = float(np.linalg.norm(seg))
            if nrm > 0:
                radii = np.arange(0.0, nrm + step, step)
                obj = term.weight * radii + 0.5 * sigma * (nrm - radii) ** 2
                out[start : start + size] = radii[np.argmin(obj)] * seg / nrm
            start += size
        return out.reshape(w.shape)

    if isinstance(term, NuclearNorm):
        if w.size > GRID_MAX_DIM:
            raise UnsupportedError(
                f"nuclear-norm oracle limited to {GRID_MAX_DIM} entries, got {w.size}"
            )
        return _conic_prox_nuclear(term.weight, sigma, w)

    raise UnsupportedError(f"no grid oracle for {type(term).__name__}")


def _conic_prox_nuclear(weight: float, sigma: float, w: np.ndarray) -> np.ndarray:
    import cvxpy as cp

    X = cp.Variable(w.shape)
    obj = weight * cp.normNuc(X) + 0.5 * sigma * cp.sum_squares(X - w)
    cp.Problem(cp.Minimize(obj)).solve(solver=cp.CLARABEL)
    if X.value is None:
        raise NumericError("conic solver returned no solution")
    return np.asarray(X.value, dtype=float)


def long_run_reference(
    problem: Problem,
    config: SolverConfig | None = None,
    max_iter: int = 2000,
    rho0: float = 1.01,
    tol: float = 1e-8,
) -> KktReference:
    """Estimated ground truth from a long, slowly-accelerating solver run.

    The solver is run with ``rho0`` close to one for `max_iter` iterations,
    or until both residuals drop below `tol`.  Everything else in `config`
    (variant, initial penalty, penalty-growth threshold, constants) is kept;
    only the stopping tolerances are tightened.

    Raises
    ------
    NumericError
        If the run diverges or hits a numerical failure.
    """
    config = config or SolverConfig()
    sched = config.schedule
    long_cfg = config.with_(
        schedule=PenaltySchedule(
            beta0=sched.beta0, beta_max=sched.beta_max, rho0=rho0, eps2=sched.eps2, alpha=sched.alpha
        ),
        stop_eps2=tol,
        eps1=tol,
        max_iter=max_iter,
        stopping_residual="auto",
        record_diagnostics=False,
        record_iterates=False,
    )
    report = solve(problem, long_cfg)
    if report.status in (Status.DIVERGED, Status.NUMERIC_ERROR):
        raise NumericError(f"reference run failed: {report.status.value} ({report.message})")
    log.info("long-run reference: %s after %d iterations, feasibility %.2e",
             report.status.value, report.iterations, report.feasibility)
    return KktReference(
        [xi.copy() for xi in report.x],
        report.lam.copy(),
        ReferenceSource.LONG_RUN,
        feasibility=report.feasibility,
        iterations=report.iterations,
    )

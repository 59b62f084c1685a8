"""LADMPSAP and its variants.

One engine serves every variant.  Per iteration it forms the auxiliary
multiplier ``lam_hat = lam + beta (sum_i A_i x_i - b)``, updates all blocks
from that same ``lam_hat`` with one (linearized) proximal step each,
updates the multiplier and finally the penalty.  The variants differ only
in how the blocks read the multiplier (all at once, or Gauss-Seidel for the
naive baseline), in the linearization constants, in the residual that
drives the penalty, and in whether set constraints are lifted first.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ..exceptions import InvalidInputError, InvalidParameterError, NumericError
from ..linops import lift_with_sets
from .config import AUTO, PenaltySchedule, SolverConfig, Status, Variant
from .problem import Problem

__all__ = [
    "SolverState",
    "Trace",
    "SolveReport",
    "StoppingCheck",
    "BlockParams",
    "resolve_params",
    "compute_lambda_hat",
    "update_blocks_parallel",
    "update_lambda",
    "update_beta",
    "check_stopping",
    "solve",
    "solve_naive_ladm",
]

log = logging.getLogger(__name__)


@dataclass
class SolverState:
    x: list
    lam: np.ndarray
    beta: float
    iter: int = 0


@dataclass
class Trace:
    """Per-iteration history.

    ``beta[k]`` is the penalty used in iteration ``k``; ``beta_history`` has
    one more entry and pairs with ``states`` (``(x^k, lam^k)`` for
    ``k = 0..K``) when iterates are recorded.
    """

    feasibility: list = field(default_factory=list)
    update_residual: list = field(default_factory=list)
    beta: list = field(default_factory=list)
    objective: list = field(default_factory=list)
    beta_history: list = field(default_factory=list)
    states: list = field(default_factory=list)

    @property
    def iterates(self) -> list:
        """``x^{k+1}`` for every completed iteration."""
        return [s[0] for s in self.states[1:]]


@dataclass
class SolveReport:
    x: list
    lam: np.ndarray
    status: Status
    iterations: int
    beta: float
    feasibility: float
    update_residual: float
    etas: list
    prox_constants: list
    norms: list
    trace: Trace | None = None
    working_problem: Problem | None = None
    working_x: list | None = None
    elapsed: float = 0.0
    message: str = ""

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED

    def ergodic(self):
        """Penalty-weighted average of the recorded iterates."""
        from .diagnostics import ergodic_average

        if self.trace is None or len(self.trace.states) < 2:
            raise InvalidInputError("solve with record_iterates=True to form ergodic averages")
        return ergodic_average(self.trace.iterates, self.trace.beta)


class StoppingCheck(NamedTuple):
    feasibility_ok: bool
    update_ok: bool
    feasibility: float
    update: float


@dataclass(frozen=True)
class BlockParams:
    """Resolved per-block constants for one solve."""

    etas: tuple
    prox_constants: tuple
    norms: tuple
    smooth: tuple  # smooth part per block or None
    prox: tuple  # proxable part per block
    beta0: float
    rhs_scale: float


def _rhs_scale(problem: Problem) -> float:
    return max(float(np.linalg.norm(problem.rhs)), 1.0)


def _combine(parts, rhs):
    acc = parts[0].copy()
    for p in parts[1:]:
        acc += p
    acc -= rhs
    return acc


def _eta_bounds(work: Problem, variant: Variant, original: Problem | None):
    """Lower bounds on eta for each block of the working problem."""
    norms = [m.norm for m in work.maps]
    if work.lift is None:
        n = work.n
        if variant is Variant.NAIVE_LADM:
            return [nm**2 for nm in norms]
        return [n * nm**2 for nm in norms]
    info = work.lift
    n = info.n_original
    orig_norms = [original.blocks[i].linmap.norm for i in range(n)]
    bounds = []
    for i in range(n):
        extra = 2.0 if i in info.aux_of else 0.0
        bounds.append(n * orig_norms[i] ** 2 + extra)
    bounds.extend([2.0] * len(info.aux_of))
    return bounds


def resolve_params(work: Problem, config: SolverConfig, original: Problem | None = None) -> BlockParams:
    """Resolve automatic constants and validate explicit ones."""
    variant = config.variant
    norms = [m.norm for m in work.maps]
    for i, nm in enumerate(norms):
        if nm == 0.0:
            raise InvalidInputError(f"block {i} has a zero linear map")

    proximal = variant is Variant.PROXIMAL
    smooth, prox = [], []
    for i, term in enumerate(work.terms):
        if proximal:
            smooth.append(term.smooth_part())
            prox.append(term.prox_part())
        else:
            if not term.proxable:
                raise InvalidInputError(
                    f"block {i} term {term!r} has no closed-form prox; use the proximal variant"
                )
            smooth.append(None)
            prox.append(term)

    bounds = _eta_bounds(work, variant, original)
    if config.eta == AUTO:
        etas = [config.eta_margin * bd for bd in bounds]
    else:
        etas = [float(e) for e in config.eta]
        if len(etas) != work.n:
            raise InvalidParameterError(f"expected {work.n} eta values, got {len(etas)}")
        if config.enforce_eta_bounds:
            for i, (e, bd) in enumerate(zip(etas, bounds)):
                if not e > bd:
                    raise InvalidParameterError(f"eta[{i}] = {e} must exceed {bd}")
        if any(e <= 0 for e in etas):
            raise InvalidParameterError("eta values must be positive")

    if config.prox_constants == AUTO:
        T = [g.lipschitz if g is not None else 0.0 for g in smooth]
    else:
        T = [float(t) for t in config.prox_constants]
        if len(T) != work.n:
            raise InvalidParameterError(f"expected {work.n} prox constants, got {len(T)}")
        if config.enforce_eta_bounds:
            for i, (t, g) in enumerate(zip(T, smooth)):
                if g is not None and t < g.lipschitz:
                    raise InvalidParameterError(f"T[{i}] = {t} is below the Lipschitz bound {g.lipschitz}")
    if not proximal:
        T = [0.0] * work.n

    return BlockParams(
        etas=tuple(etas),
        prox_constants=tuple(T),
        norms=tuple(norms),
        smooth=tuple(smooth),
        prox=tuple(prox),
        beta0=config.schedule.initial_beta(work.rhs.size),
        rhs_scale=_rhs_scale(work),
    )


def compute_lambda_hat(state: SolverState, problem: Problem) -> np.ndarray:
    """``lam + beta (sum_i A_i(x_i) - b)``."""
    r = _combine([blk.linmap.apply(xi) for blk, xi in zip(problem.blocks, state.x)], problem.rhs)
    return state.lam + state.beta * r


def _block_step(x, atl, prox_term, smooth_term, beta, eta, T, grad=None):
    tau = T + beta * eta
    if smooth_term is not None:
        if grad is None:
            grad = smooth_term.gradient(x)
        w = x - (atl + grad) / tau
    else:
        w = x - atl / tau
    return prox_term.prox(w, tau)


def update_blocks_parallel(
    state: SolverState,
    problem: Problem,
    params: BlockParams,
    lam_hat: np.ndarray | None = None,
    grads=None,
    workers: int = 1,
) -> list:
    """One linearized proximal step per block, all reading the same ``lam_hat``."""
    if lam_hat is None:
        lam_hat = compute_lambda_hat(state, problem)
    grads = grads or [None] * problem.n

    def step(i):
        blk = problem.blocks[i]
        atl = blk.linmap.adjoint(lam_hat)
        return _block_step(
            state.x[i],
            atl,
            params.prox[i],
            params.smooth[i],
            state.beta,
            params.etas[i],
            params.prox_constants[i],
            grads[i],
        )

    if workers > 1 and problem.n > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(step, range(problem.n)))
    return [step(i) for i in range(problem.n)]


def update_lambda(state: SolverState, problem: Problem, new_x) -> np.ndarray:
    """``lam + beta (sum_i A_i(x_i^{k+1}) - b)``."""
    r = _combine([blk.linmap.apply(xi) for blk, xi in zip(problem.blocks, new_x)], problem.rhs)
    return state.lam + state.beta * r


def update_beta(beta: float, schedule: PenaltySchedule, max_relative_step: float, fixed: bool = False) -> float:
    """Next penalty: grow by ``rho0`` only when the step residual is below ``eps2``."""
    if fixed:
        return beta
    rho = schedule.rho0 if max_relative_step < schedule.eps2 else 1.0
    return min(schedule.beta_max, rho * beta)


def _update_residual(kind, x, new_x, beta, params, grads_old, grads_new):
    vals = []
    for i, (xo, xn) in enumerate(zip(x, new_x)):
        dx = xn - xo
        if kind == "step":
            vals.append(beta * np.sqrt(params.etas[i]) * np.linalg.norm(dx))
        else:
            tau = params.prox_constants[i] + beta * params.etas[i]
            if params.smooth[i] is not None:
                v = grads_new[i] - grads_old[i] - tau * dx
            else:
                v = tau * dx
            vals.append(np.linalg.norm(v) / params.norms[i])
    return max(vals) / params.rhs_scale


def _plain_step(x, new_x, rhs_scale):
    return max(float(np.linalg.norm(xn - xo)) for xo, xn in zip(x, new_x)) / rhs_scale


def check_stopping(
    state: SolverState,
    new_x,
    problem: Problem,
    config: SolverConfig,
    params: BlockParams | None = None,
) -> StoppingCheck:
    """Evaluate both stopping tests for the step ``state.x -> new_x``."""
    if params is None:
        params = resolve_params(problem, config)
    r = _combine([blk.linmap.apply(xi) for blk, xi in zip(problem.blocks, new_x)], problem.rhs)
    feas = float(np.linalg.norm(r)) / params.rhs_scale
    kind = config.residual_kind()
    grads_old = grads_new = None
    if kind == "gradient":
        grads_old = [g.gradient(xi) if g is not None else None for g, xi in zip(params.smooth, state.x)]
        grads_new = [g.gradient(xi) if g is not None else None for g, xi in zip(params.smooth, new_x)]
    upd = float(_update_residual(kind, state.x, new_x, state.beta, params, grads_old, grads_new))
    if config.stopping_residual == "plain":
        upd = _plain_step(state.x, new_x, params.rhs_scale)
    return StoppingCheck(feas < config.eps1, upd < config.eps2, feas, upd)


def _prepare(problem: Problem, config: SolverConfig):
    variant = config.variant
    if variant in (Variant.PRACTICAL, Variant.PROXIMAL) and problem.has_sets:
        work = lift_with_sets(problem)
    elif variant is Variant.PRACTICAL:
        raise InvalidInputError("the practical variant needs at least one block with a convex set")
    elif problem.has_sets:
        raise InvalidInputError(
            f"variant {variant.value!r} cannot honour set constraints; use 'practical'"
        )
    else:
        work = problem
    return work, resolve_params(work, config, original=problem)


def solve(problem: Problem, config: SolverConfig | None = None) -> SolveReport:
    """Run the configured variant until both stopping tests pass.

    Returns a report whose status is ``CONVERGED`` exactly when the final
    feasibility residual is below ``eps1`` and the update residual below
    ``eps2``.  Iteration stops early with ``DIVERGED`` when the residual grows
    past ``divergence_factor`` times its starting size or an iterate stops
    being finite, and with ``NUMERIC_ERROR`` when a prox kernel fails.
    """
    config = config or SolverConfig()
    work, params = _prepare(problem, config)
    sequential = config.variant is Variant.NAIVE_LADM
    return _run(problem, work, config, params, sequential)


def solve_naive_ladm(problem: Problem, config: SolverConfig | None = None) -> SolveReport:
    """Gauss-Seidel generalization: block ``i`` sees blocks ``j < i`` already updated.

    Kept only as the baseline that may fail to converge for three or more
    blocks.
    """
    config = (config or SolverConfig()).with_(variant=Variant.NAIVE_LADM)
    work, params = _prepare(problem, config)
    return _run(problem, work, config, params, sequential=True)


def _sequential_sweep(work, params, x, Ax, lam, beta):
    new_x = list(x)
    parts = list(Ax)
    for i, blk in enumerate(work.blocks):
        lam_tilde = lam + beta * _combine(parts, work.rhs)
        atl = blk.linmap.adjoint(lam_tilde)
        new_x[i] = _block_step(x[i], atl, params.prox[i], None, beta, params.etas[i], 0.0)
        parts[i] = blk.linmap.apply(new_x[i])
    return new_x, parts


def _finite(blocks) -> bool:
    return all(np.all(np.isfinite(b)) for b in blocks)


def _run(original: Problem, work: Problem, config: SolverConfig, params: BlockParams, sequential: bool) -> SolveReport:
    t0 = time.perf_counter()
    kind = config.residual_kind()
    fixed = config.variant is Variant.LADMPS_FIXED_BETA
    record = config.record_diagnostics or config.record_iterates
    trace = Trace() if record else None

    x = work.initial_point()
    lam = np.zeros(work.rhs.shape) if config.lambda0 is None else np.array(config.lambda0, dtype=float).reshape(work.rhs.shape)
    beta = params.beta0
    Ax = [blk.linmap.apply(xi) for blk, xi in zip(work.blocks, x)]
    r = _combine(Ax, work.rhs)
    guard = config.divergence_factor * max(float(np.linalg.norm(r)), params.rhs_scale)
    grads = [g.gradient(xi) if g is not None else None for g, xi in zip(params.smooth, x)]

    if trace is not None:
        trace.beta_history.append(beta)
        if config.record_iterates:
            trace.states.append(([xi.copy() for xi in x], lam.copy()))

    status = Status.MAX_ITER
    message = ""
    feas = float(np.linalg.norm(r)) / params.rhs_scale
    upd = float("inf")
    k = 0
    while k < config.max_iter:
        try:
            if sequential:
                new_x, new_Ax = _sequential_sweep(work, params, x, Ax, lam, beta)
            else:
                lam_hat = lam + beta * r
                state = SolverState(x, lam, beta, k)
                new_x = update_blocks_parallel(state, work, params, lam_hat, grads, config.workers)
                new_Ax = [blk.linmap.apply(xi) for blk, xi in zip(work.blocks, new_x)]
        except (NumericError, np.linalg.LinAlgError, FloatingPointError) as exc:
            status, message = Status.NUMERIC_ERROR, str(exc)
            break
        k += 1
        new_r = _combine(new_Ax, work.rhs)
        rnorm = float(np.linalg.norm(new_r))
        feas = rnorm / params.rhs_scale
        new_grads = [g.gradient(xi) if g is not None else None for g, xi in zip(params.smooth, new_x)]
        upd = float(_update_residual(kind, x, new_x, beta, params, grads, new_grads))
        new_lam = lam + beta * new_r

        if trace is not None:
            trace.feasibility.append(feas)
            trace.update_residual.append(upd)
            trace.beta.append(beta)
            if config.record_diagnostics:
                trace.objective.append(work.objective(new_x))

        prev_x = x
        x, Ax, r, lam, grads = new_x, new_Ax, new_r, new_lam, new_grads
        if not (np.isfinite(rnorm) and _finite(x)) or rnorm > guard:
            status = Status.DIVERGED
            message = f"residual {rnorm:.3e} exceeded guard {guard:.3e}" if np.isfinite(rnorm) else "non-finite iterate"
            if trace is not None:
                trace.beta_history.append(beta)
                if config.record_iterates:
                    trace.states.append(([xi.copy() for xi in x], lam.copy()))
            break

        stop_upd = upd if config.stopping_residual != "plain" else _plain_step(prev_x, x, params.rhs_scale)
        converged = feas < config.eps1 and stop_upd < config.eps2
        beta = update_beta(beta, config.schedule, upd, fixed=fixed)
        if trace is not None:
            trace.beta_history.append(beta)
            if config.record_iterates:
                trace.states.append(([xi.copy() for xi in x], lam.copy()))
        if converged:
            status = Status.CONVERGED
            break

    if work.lift is not None:
        info = work.lift
        out_x = [x[info.aux_of[i]] if i in info.aux_of else x[i] for i in range(info.n_original)]
    else:
        out_x = x
    elapsed = time.perf_counter() - t0
    log.info("%s: %s after %d iterations (feas %.2e, upd %.2e, beta %.3g)",
             config.variant.value, status.value, k, feas, upd, beta)
    return SolveReport(
        x=out_x,
        lam=lam,
        status=status,
        iterations=k,
        beta=beta,
        feasibility=feas,
        update_residual=upd,
        etas=list(params.etas),
        prox_constants=list(params.prox_constants),
        norms=list(params.norms),
        trace=trace,
        working_problem=work,
        working_x=x,
        elapsed=elapsed,
        message=message,
    )

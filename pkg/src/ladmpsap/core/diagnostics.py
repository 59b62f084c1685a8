"""Convergence diagnostics that need a reference KKT point."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..exceptions import InvalidInputError
from ..linops import inner
from .problem import Problem

__all__ = ["ergodic_weights", "ergodic_average", "optimality_measure", "rate_alpha", "fejer_diagnostic"]


def ergodic_weights(betas: Sequence[float]) -> np.ndarray:
    """``gamma_k = beta_k^{-1} / sum_j beta_j^{-1}``."""
    inv = 1.0 / np.asarray(betas, dtype=float)
    if inv.size == 0:
        raise InvalidInputError("empty penalty sequence")
    return inv / inv.sum()


def ergodic_average(iterates: Sequence[Sequence[np.ndarray]], betas: Sequence[float]) -> list:
    """Weighted average ``sum_k gamma_k x^{k+1}`` of per-iteration block lists.

    ``iterates[k]`` is ``x^{k+1}`` and ``betas[k]`` the penalty that produced it.
    """
    if len(iterates) == 0:
        raise InvalidInputError("ergodic average of an empty trace")
    if len(iterates) != len(betas):
        raise InvalidInputError(f"{len(iterates)} iterates but {len(betas)} penalties")
    gamma = ergodic_weights(betas)
    avg = [np.zeros_like(xi, dtype=float) for xi in iterates[0]]
    for g, xs in zip(gamma, iterates):
        for a, xi in zip(avg, xs):
            a += g * xi
    return avg


def rate_alpha(norms: Sequence[float], etas: Sequence[float]) -> float:
    """``alpha`` with ``1/alpha = (n+1) max(1, {||A_i||^2 / (eta_i - n ||A_i||^2)})``."""
    n = len(norms)
    if any(e - n * nm**2 <= 0 for nm, e in zip(norms, etas)):
        raise InvalidInputError("alpha is only defined when every eta_i exceeds n ||A_i||^2")
    ratios = [nm**2 / (e - n * nm**2) for nm, e in zip(norms, etas)]
    return 1.0 / ((n + 1) * max([1.0] + ratios))


def optimality_measure(x_tilde, reference, problem: Problem, alpha: float) -> float:
    """``f(x~) - f(x*) + sum_i <A_i^T lam*, x~_i - x*_i> + alpha ||sum_i A_i x~_i - b||^2``.

    Nonnegative, and zero exactly at solutions.  `reference` is anything
    with ``x_star`` and ``lambda_star`` attributes or an ``(x*, lam*)`` pair.
    """
    x_star, lam_star = _unpack(reference)
    val = problem.objective(x_tilde) - problem.objective(x_star)
    for blk, xt, xs in zip(problem.blocks, x_tilde, x_star):
        val += inner(blk.linmap.adjoint(lam_star), xt - xs)
    r = problem.residual(x_tilde)
    return float(val + alpha * inner(r, r))


def fejer_diagnostic(states, betas: Sequence[float], reference, etas: Sequence[float]) -> list:
    """``sum_i eta_i ||x_i^k - x_i*||^2 + beta_k^{-2} ||lam^k - lam*||^2`` along a trace.

    `states` holds ``(x^k, lam^k)`` pairs and `betas` the matching ``beta_k``
    (``Trace.states`` and ``Trace.beta_history``).
    """
    x_star, lam_star = _unpack(reference)
    if len(states) != len(betas):
        raise InvalidInputError(f"{len(states)} states but {len(betas)} penalties")
    out = []
    for (x, lam), beta in zip(states, betas):
        q = sum(e * float(np.sum((xi - xs) ** 2)) for e, xi, xs in zip(etas, x, x_star))
        d = lam - lam_star
        q += float(np.vdot(d, d)) / beta**2
        out.append(q)
    return out


def _unpack(reference):
    if hasattr(reference, "x_star"):
        return reference.x_star, reference.lambda_star
    x_star, lam_star = reference
    return x_star, lam_star

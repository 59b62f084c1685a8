"""Builders for the exemplar problems and their synthetic data.

All generators draw from ``numpy.random.default_rng(seed)`` (the PCG64 bit
generator), so a given seed reproduces the same data on every platform
numpy supports.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core.problem import BlockSpec, Problem
from .exceptions import InvalidInputError, InvalidParameterError
from .linops import DenseMatrix, Identity, LeftMultiply, Mask, Negated, RightMultiply, as_block
from .proxlib import GroupL2, L1Norm, LogisticLoss, NonnegativeCone, NuclearNorm, SquaredFrobenius

__all__ = [
    "LatentLrrSpec",
    "NmcSpec",
    "GroupLogisticSpec",
    "build_latent_lrr",
    "build_nmc",
    "build_group_logistic",
    "build_parallel_bp",
    "overlapping_groups",
    "selection_matrix",
    "gen_latent_lrr_data",
    "gen_nmc_data",
    "gen_group_logistic_data",
    "fa_metric",
]


@dataclass(frozen=True)
class LatentLrrSpec:
    s: int
    p: int
    d: int
    r_tilde: int
    mu: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if min(self.s, self.p, self.d, self.r_tilde) < 1:
            raise InvalidParameterError("s, p, d and r_tilde must be positive")
        if self.r_tilde > self.d:
            raise InvalidParameterError("r_tilde cannot exceed the ambient dimension")


@dataclass(frozen=True)
class NmcSpec:
    m: int
    n: int
    r: int
    q: float
    noise_std: float = 0.0
    mu: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.q <= 1:
            raise InvalidParameterError("sample ratio q must lie in (0, 1]")
        if not 1 <= self.r <= min(self.m, self.n):
            raise InvalidParameterError("rank must lie in [1, min(m, n)]")
        if self.noise_std < 0:
            raise InvalidParameterError("noise_std must be nonnegative")


@dataclass(frozen=True)
class GroupLogisticSpec:
    t: int
    s: int
    q: int
    mu: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.t < 1 or self.s < 1:
            raise InvalidParameterError("t and s must be positive")
        if not 0 <= self.q <= self.t:
            raise InvalidParameterError("q must lie in [0, t]")

    @property
    def p(self) -> int:
        return 9 * self.t + 1


def build_latent_lrr(X, mu: float) -> Problem:
    """``min ||Z||_* + ||L||_* + mu ||E||_1  s.t.  XZ + LX + E = X``."""
    X = as_block(X)
    if not np.any(X):
        raise InvalidInputError("data matrix is zero")
    d, N = X.shape
    return Problem(
        [
            BlockSpec(NuclearNorm(), LeftMultiply(X, cols=N), name="Z"),
            BlockSpec(NuclearNorm(), RightMultiply(X, rows=d), name="L"),
            BlockSpec(L1Norm(mu), Identity((d, N)), name="E"),
        ],
        X,
    )


def build_nmc(b_obs, omega, shape, mu: float) -> Problem:
    """``min ||X||_* + 1/(2 mu) ||e||^2  s.t.  P_Omega(X) + e = b, X >= 0``.

    The nonnegativity constraint is attached to ``X`` as a convex set, so the
    problem is meant for the practical variant, which lifts it.
    """
    if mu <= 0:
        raise InvalidParameterError("mu must be positive")
    mask = Mask(omega, shape)
    b_obs = as_block(b_obs, mask.output_shape)
    return Problem(
        [
            BlockSpec(NuclearNorm(), mask, convex_set=NonnegativeCone(), name="X"),
            BlockSpec(SquaredFrobenius(mu), Identity(mask.output_shape), name="E"),
        ],
        b_obs,
    )


def overlapping_groups(t: int) -> list[np.ndarray]:
    """Groups of ten consecutive variables, successive groups sharing one."""
    return [np.arange(9 * j, 9 * j + 10) for j in range(t)]


def selection_matrix(groups, p: int, with_bias: bool = True) -> np.ndarray:
    """Stack of selection matrices: one row per group member, a single 1 per row.

    With `with_bias` an all-zero column is appended for the intercept.
    """
    rows = sum(len(g) for g in groups)
    S = np.zeros((rows, p + (1 if with_bias else 0)))
    r = 0
    for g in groups:
        for idx in g:
            if not 0 <= idx < p:
                raise InvalidInputError(f"group index {idx} outside [0, {p})")
            S[r, idx] = 1.0
            r += 1
    return S


def build_group_logistic(X, y, groups, mu: float) -> Problem:
    """Group-sparse logistic regression with overlapping groups.

    Variables are ``wbar = (w, bias)`` and the stacked group copies ``z``;
    the coupling ``Sbar wbar - z = 0`` carries the overlap.  The loss is
    smooth only, so the problem is meant for the proximal variant.
    """
    X = as_block(X)
    p, s = X.shape
    Xbar = np.vstack([X, np.ones((1, s))])
    S = selection_matrix(groups, p)
    sizes = [len(g) for g in groups]
    z_shape = (S.shape[0], 1)
    return Problem(
        [
            BlockSpec(LogisticLoss(Xbar, y), DenseMatrix(S), name="w"),
            BlockSpec(GroupL2(sizes, mu), Negated(Identity(z_shape)), name="z"),
        ],
        np.zeros(z_shape),
    )


def build_parallel_bp(n: int, m: int, d: int, seed: int = 0) -> Problem:
    """``min sum_i ||x_i||_1  s.t.  sum_i A_i x_i = b`` with standard normal data."""
    if n < 2:
        raise InvalidParameterError("need at least two blocks")
    rng = np.random.default_rng(seed)
    mats = [rng.standard_normal((m, d)) for _ in range(n)]
    b = rng.standard_normal((m, 1))
    return Problem(
        [BlockSpec(L1Norm(), DenseMatrix(A), name=f"x{i}") for i, A in enumerate(mats)], b
    )


def gen_latent_lrr_data(spec: LatentLrrSpec) -> np.ndarray:
    """``d x (s p)`` data drawn from a union of `s` random ``r_tilde``-dim subspaces."""
    rng = np.random.default_rng(spec.seed)
    cols = []
    for _ in range(spec.s):
        basis, _ = np.linalg.qr(rng.standard_normal((spec.d, spec.r_tilde)))
        cols.append(basis @ rng.standard_normal((spec.r_tilde, spec.p)))
    return np.hstack(cols)


def gen_nmc_data(spec: NmcSpec, max_tries: int = 100):
    """Nonnegative rank-``r`` truth, sampled entries and noisy observations.

    The truth is the rank-``r`` truncation of a uniform random matrix.  Draws
    whose truncation has a negative entry are rejected, so the returned
    matrix is exactly rank ``r`` and nonnegative; after `max_tries`
    rejections the last truncation is clamped at zero instead.

    Returns ``(X0, b_obs, omega)`` with ``omega = (rows, cols)`` holding
    ``round(q m n)`` distinct entries.
    """
    rng = np.random.default_rng(spec.seed)
    for _ in range(max_tries):
        M = rng.random((spec.m, spec.n))
        U, sv, Vt = np.linalg.svd(M, full_matrices=False)
        X0 = (U[:, : spec.r] * sv[: spec.r]) @ Vt[: spec.r]
        if X0.min() >= 0:
            break
    else:
        X0 = np.maximum(X0, 0.0)
    count = int(round(spec.q * spec.m * spec.n))
    flat = np.sort(rng.choice(spec.m * spec.n, size=count, replace=False))
    rows, cols = np.unravel_index(flat, (spec.m, spec.n))
    b = X0[rows, cols].reshape(-1, 1)
    if spec.noise_std > 0:
        b = b + spec.noise_std * rng.standard_normal(b.shape)
    return X0, b, (rows, cols)


def gen_group_logistic_data(spec: GroupLogisticSpec):
    """Synthetic data with ``p = 9t + 1`` features in overlapping groups of ten.

    ``q`` groups are drawn as the support; variables shared with an unchosen
    group are dropped from it.  Labels alternate ``+1, -1, ...``; support
    rows are uniform on ``[0.5, 1.5]`` for positive and ``[-1.5, -0.5]`` for
    negative samples, the other rows uniform on ``[-0.5, 0.5]``.

    Returns ``(X, y, support)`` with ``X`` of shape ``(p, s)`` and `support`
    a sorted index array.
    """
    rng = np.random.default_rng(spec.seed)
    groups = overlapping_groups(spec.t)
    chosen = np.sort(rng.choice(spec.t, size=spec.q, replace=False))
    in_chosen = np.zeros(spec.p, dtype=bool)
    in_other = np.zeros(spec.p, dtype=bool)
    for j, g in enumerate(groups):
        (in_chosen if j in chosen else in_other)[g] = True
    support = np.flatnonzero(in_chosen & ~in_other)

    y = np.where(np.arange(spec.s) % 2 == 0, 1.0, -1.0)
    X = rng.uniform(-0.5, 0.5, size=(spec.p, spec.s))
    informative = rng.uniform(0.5, 1.5, size=(support.size, spec.s))
    X[support] = informative * y
    return X, y, support


def fa_metric(X_hat, X0) -> float:
    """Relative nonnegative feasibility ``||min(X_hat, 0)|| / ||X0||``."""
    X_hat, X0 = np.asarray(X_hat, dtype=float), np.asarray(X0, dtype=float)
    if X_hat.shape != X0.shape:
        raise InvalidInputError(f"shapes differ: {X_hat.shape} vs {X0.shape}")
    scale = float(np.linalg.norm(X0)) or 1.0
    return float(np.linalg.norm(np.minimum(X_hat, 0.0))) / scale

"""Proximal operators and objective terms.

The proximal operation of a convex function ``h`` with parameter ``sigma``
is ``argmin_x h(x) + sigma/2 * ||x - w||^2``.  The free functions below are
the closed forms; the :class:`Term` classes wrap them with value and
gradient routines so the solvers can treat every block uniformly.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
from scipy.special import expit

from .exceptions import DimensionError, InvalidInputError, InvalidParameterError, NumericError

__all__ = [
    "prox_l1",
    "prox_nuclear",
    "prox_sq_frobenius",
    "prox_group_l2",
    "project_nonneg",
    "logistic_value_grad",
    "logistic_lipschitz_bound",
    "ConvexSet",
    "NonnegativeCone",
    "Term",
    "ZeroTerm",
    "L1Norm",
    "NuclearNorm",
    "SquaredFrobenius",
    "GroupL2",
    "Indicator",
    "ShiftedSquare",
    "LogisticLoss",
    "Composite",
]


def _check_eps(eps):
    if eps < 0:
        raise InvalidParameterError(f"threshold must be nonnegative, got {eps}")


def prox_l1(w: np.ndarray, eps: float) -> np.ndarray:
    """Soft thresholding ``sgn(w) * max(|w| - eps, 0)``."""
    _check_eps(eps)
    if eps == 0:
        return np.array(w, dtype=float, copy=True)
    return np.sign(w) * np.maximum(np.abs(w) - eps, 0.0)


def _full_svd(W):
    return np.linalg.svd(W, full_matrices=False)


def prox_nuclear(W: np.ndarray, eps: float, svd: Callable | None = None) -> np.ndarray:
    """Singular value thresholding ``U max(S - eps, 0) V^T``.

    `svd` may replace the dense decomposition (e.g. with a truncated one); it
    must return ``(U, s, Vt)`` like ``numpy.linalg.svd(W, full_matrices=False)``.
    """
    _check_eps(eps)
    if eps == 0:
        return np.array(W, dtype=float, copy=True)
    try:
        U, s, Vt = (svd or _full_svd)(W)
    except np.linalg.LinAlgError as exc:
        raise NumericError(
            f"SVD failed on a {W.shape} block (max |entry| {np.max(np.abs(W)):.3e}, "
            f"finite={bool(np.all(np.isfinite(W)))})"
        ) from exc
    s = np.maximum(s - eps, 0.0)
    k = int(np.count_nonzero(s))
    return (U[:, :k] * s[:k]) @ Vt[:k]


def prox_sq_frobenius(w: np.ndarray, mu: float, sigma: float) -> np.ndarray:
    """Minimizer of ``1/(2 mu) ||e||^2 + sigma/2 ||e - w||^2``."""
    if mu <= 0 or sigma <= 0:
        raise InvalidParameterError("mu and sigma must be positive")
    return w * (mu * sigma / (mu * sigma + 1.0))


def _group_slices(group_sizes, length):
    sizes = [int(g) for g in group_sizes]
    if any(g <= 0 for g in sizes) or sum(sizes) != length:
        raise DimensionError(f"group sizes {sizes} do not partition a vector of length {length}")
    bounds = np.cumsum([0] + sizes)
    return [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:])]


def prox_group_l2(w: np.ndarray, eps: float, group_sizes: Sequence[int]) -> np.ndarray:
    """Block soft thresholding: each group scaled by ``max(1 - eps/||w_j||, 0)``."""
    _check_eps(eps)
    flat = np.asarray(w, dtype=float).ravel()
    out = np.zeros_like(flat)
    for sl in _group_slices(group_sizes, flat.size):
        g = flat[sl]
        nrm = np.linalg.norm(g)
        if nrm > eps:
            out[sl] = g * (1.0 - eps / nrm)
    return out.reshape(np.shape(w))


def project_nonneg(w: np.ndarray) -> np.ndarray:
    return np.maximum(w, 0.0)


def logistic_value_grad(wbar: np.ndarray, Xbar: np.ndarray, y: np.ndarray):
    """Average logistic loss ``1/s sum log(1 + exp(-y_i wbar^T xbar_i))`` and its gradient.

    `Xbar` holds one sample per column (bias row included by the caller).
    """
    y = np.asarray(y, dtype=float).ravel()
    s = y.size
    if Xbar.shape[1] != s or s < 1:
        raise DimensionError(f"Xbar has {Xbar.shape[1]} columns but y has {s} labels")
    if not np.all(np.abs(y) == 1.0):
        raise InvalidInputError("labels must be -1 or +1")
    margins = y * (Xbar.T @ wbar).ravel()
    value = float(np.mean(np.logaddexp(0.0, -margins)))
    coef = -y * expit(-margins) / s
    grad = (Xbar @ coef).reshape(wbar.shape)
    return value, grad


def logistic_lipschitz_bound(Xbar: np.ndarray) -> float:
    """``||Xbar||_2^2 / (4 s)`` with ``s`` the number of samples (columns)."""
    s = Xbar.shape[1]
    return float(np.linalg.norm(Xbar, 2) ** 2 / (4.0 * s))


class ConvexSet:
    """A closed convex set with an inexpensive projection."""

    def project(self, w: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def contains(self, w: np.ndarray, tol: float = 0.0) -> bool:
        raise NotImplementedError


class NonnegativeCone(ConvexSet):
    def project(self, w):
        return project_nonneg(w)

    def contains(self, w, tol=0.0):
        return bool(np.all(w >= -tol))

    def __repr__(self):
        return "NonnegativeCone()"


class Term:
    """One objective component ``f_i = g_i + h_i``.

    ``h`` is handled through :meth:`prox`, ``g`` through :meth:`gradient`.
    A term without a smooth part has ``smooth = False``; a term without a
    usable prox has ``proxable = False``.
    """

    smooth = False
    proxable = True

    def value(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def prox(self, w: np.ndarray, sigma: float) -> np.ndarray:
        raise NotImplementedError

    def gradient(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @property
    def lipschitz(self) -> float:
        return 0.0

    # split used by the proximal variant
    def smooth_part(self) -> Term | None:
        return self if self.smooth and not self.proxable else None

    def prox_part(self) -> Term:
        return self if self.proxable else ZeroTerm()


class ZeroTerm(Term):
    def value(self, x):
        return 0.0

    def prox(self, w, sigma):
        return np.array(w, dtype=float, copy=True)

    def __repr__(self):
        return "ZeroTerm()"


class L1Norm(Term):
    def __init__(self, weight: float = 1.0):
        if weight < 0:
            raise InvalidParameterError("weight must be nonnegative")
        self.weight = float(weight)

    def value(self, x):
        return self.weight * float(np.abs(x).sum())

    def prox(self, w, sigma):
        return prox_l1(w, self.weight / sigma)

    def __repr__(self):
        return f"L1Norm({self.weight})"


class NuclearNorm(Term):
    def __init__(self, weight: float = 1.0, svd: Callable | None = None):
        if weight < 0:
            raise InvalidParameterError("weight must be nonnegative")
        self.weight = float(weight)
        self.svd = svd

    def value(self, x):
        return self.weight * float(np.linalg.svd(x, compute_uv=False).sum())

    def prox(self, w, sigma):
        return prox_nuclear(w, self.weight / sigma, svd=self.svd)

    def __repr__(self):
        return f"NuclearNorm({self.weight})"


class SquaredFrobenius(Term):
    """``1/(2 mu) ||x||^2``."""

    smooth = True

    def __init__(self, mu: float):
        if mu <= 0:
            raise InvalidParameterError("mu must be positive")
        self.mu = float(mu)

    def value(self, x):
        return float(np.vdot(x, x)) / (2.0 * self.mu)

    def prox(self, w, sigma):
        return prox_sq_frobenius(w, self.mu, sigma)

    def gradient(self, x):
        return x / self.mu

    @property
    def lipschitz(self):
        return 1.0 / self.mu

    def __repr__(self):
        return f"SquaredFrobenius(mu={self.mu})"


class GroupL2(Term):
    """``weight * sum_j ||x_j||`` over consecutive groups of the flattened block."""

    def __init__(self, group_sizes: Sequence[int], weight: float = 1.0):
        if weight < 0:
            raise InvalidParameterError("weight must be nonnegative")
        self.group_sizes = tuple(int(g) for g in group_sizes)
        self.weight = float(weight)

    def value(self, x):
        flat = np.ravel(x)
        return self.weight * sum(
            float(np.linalg.norm(flat[sl])) for sl in _group_slices(self.group_sizes, flat.size)
        )

    def prox(self, w, sigma):
        return prox_group_l2(w, self.weight / sigma, self.group_sizes)

    def __repr__(self):
        return f"GroupL2({len(self.group_sizes)} groups, weight={self.weight})"


class Indicator(Term):
    """Characteristic function of a convex set (0 inside, +inf outside)."""

    def __init__(self, convex_set: ConvexSet):
        self.convex_set = convex_set

    def value(self, x):
        return 0.0 if self.convex_set.contains(x, tol=1e-12) else float("inf")

    def prox(self, w, sigma):
        return self.convex_set.project(w)

    def __repr__(self):
        return f"Indicator({self.convex_set!r})"


class ShiftedSquare(Term):
    """``scale/2 * ||x - center||^2``; both smooth and proxable."""

    smooth = True

    def __init__(self, center, scale: float = 1.0):
        if scale <= 0:
            raise InvalidParameterError("scale must be positive")
        self.center = np.asarray(center, dtype=float)
        self.scale = float(scale)

    def value(self, x):
        d = x - self.center
        return 0.5 * self.scale * float(np.vdot(d, d))

    def prox(self, w, sigma):
        return (self.scale * self.center + sigma * w) / (self.scale + sigma)

    def gradient(self, x):
        return self.scale * (x - self.center)

    @property
    def lipschitz(self):
        return self.scale


class LogisticLoss(Term):
    """Average logistic loss over the columns of `Xbar` (smooth only)."""

    smooth = True
    proxable = False

    def __init__(self, Xbar, y):
        self.Xbar = np.asarray(Xbar, dtype=float)
        self.y = np.asarray(y, dtype=float).ravel()
        if self.Xbar.shape[1] != self.y.size:
            raise DimensionError("Xbar columns and labels differ in count")
        if not np.all(np.abs(self.y) == 1.0):
            raise InvalidInputError("labels must be -1 or +1")

    def value(self, x):
        return logistic_value_grad(x, self.Xbar, self.y)[0]

    def gradient(self, x):
        return logistic_value_grad(x, self.Xbar, self.y)[1]

    @property
    def lipschitz(self):
        return logistic_lipschitz_bound(self.Xbar)

    def __repr__(self):
        return f"LogisticLoss({self.Xbar.shape[0]} features, {self.y.size} samples)"


class Composite(Term):
    """``g + h`` with ``g`` smooth and ``h`` proxable."""

    smooth = True
    proxable = False

    def __init__(self, smooth_term: Term, prox_term: Term):
        if not smooth_term.smooth:
            raise InvalidInputError("first component must be smooth")
        if not prox_term.proxable:
            raise InvalidInputError("second component must have a prox")
        self.g = smooth_term
        self.h = prox_term

    def value(self, x):
        return self.g.value(x) + self.h.value(x)

    def gradient(self, x):
        return self.g.gradient(x)

    @property
    def lipschitz(self):
        return self.g.lipschitz

    def smooth_part(self):
        return self.g

    def prox_part(self):
        return self.h

    def __repr__(self):
        return f"Composite({self.g!r}, {self.h!r})"

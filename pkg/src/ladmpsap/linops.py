"""Linear maps acting on blocks of variables.

A *block* is a dense real ``numpy`` array with two dimensions; vectors are
stored as single columns.  Every linear map in this module knows its input
and output shapes, evaluates itself and its adjoint, and can estimate its
operator norm by power iteration on ``A^T A``.

Maps are immutable once built and never materialize large matrices:
:class:`LeftMultiply` and :class:`RightMultiply` keep the factor matrix and
evaluate products on the fly, and :class:`Stacked` records flat offsets for
its components.
"""

from __future__ import annotations

import logging
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np

from .exceptions import DimensionError, InvalidInputError, InvalidParameterError

__all__ = [
    "as_block",
    "inner",
    "LinearMap",
    "DenseMatrix",
    "Identity",
    "Mask",
    "LeftMultiply",
    "RightMultiply",
    "Stacked",
    "Negated",
    "NormEstimate",
    "apply",
    "adjoint",
    "op_norm",
    "lift_with_sets",
]

log = logging.getLogger(__name__)

POWER_TOL = 1e-9
POWER_MAX_ITER = 1000


def as_block(x, shape=None) -> np.ndarray:
    """Return `x` as a finite 2-D float array (1-D input becomes a column)."""
    arr = np.array(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    elif arr.ndim != 2:
        raise DimensionError(f"blocks are 2-D, got an array with ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("block contains NaN or Inf entries")
    if shape is not None and arr.shape != tuple(shape):
        raise DimensionError(f"expected block of shape {tuple(shape)}, got {arr.shape}")
    return arr


def inner(x: np.ndarray, y: np.ndarray) -> float:
    """Frobenius inner product."""
    return float(np.vdot(x, y))


class NormEstimate(NamedTuple):
    value: float
    converged: bool
    iterations: int


class LinearMap:
    """Base class: a linear map between spaces of fixed-shape blocks.

    Subclasses implement ``_apply`` and ``_adjoint``; the public methods
    check shapes.
    """

    def __init__(self, input_shape, output_shape):
        self.input_shape = tuple(int(s) for s in input_shape)
        self.output_shape = tuple(int(s) for s in output_shape)

    def apply(self, x: np.ndarray) -> np.ndarray:
        if x.shape != self.input_shape:
            raise DimensionError(
                f"{type(self).__name__} expects input {self.input_shape}, got {x.shape}"
            )
        return self._apply(x)

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        if y.shape != self.output_shape:
            raise DimensionError(
                f"{type(self).__name__} adjoint expects {self.output_shape}, got {y.shape}"
            )
        return self._adjoint(y)

    __call__ = apply

    def _apply(self, x):
        raise NotImplementedError

    def _adjoint(self, y):
        raise NotImplementedError

    @cached_property
    def norm(self) -> float:
        """Operator norm (largest singular value), computed once."""
        est = op_norm(self)
        if not est.converged:
            log.warning(
                "power iteration for %s stopped after %d iterations without converging",
                type(self).__name__,
                est.iterations,
            )
        return est.value

    def exact_norm(self) -> float | None:
        """Closed-form operator norm when one is known, else ``None``."""
        return None

    @property
    def input_size(self) -> int:
        return int(np.prod(self.input_shape))

    @property
    def output_size(self) -> int:
        return int(np.prod(self.output_shape))

    def to_matrix(self) -> np.ndarray:
        """Dense matrix acting on row-major flattened blocks.

        Intended for small maps only (oracles, tests).
        """
        cols = []
        e = np.zeros(self.input_size)
        for j in range(self.input_size):
            e[j] = 1.0
            cols.append(self._apply(e.reshape(self.input_shape)).ravel())
            e[j] = 0.0
        return np.column_stack(cols) if cols else np.zeros((self.output_size, 0))

    def __neg__(self) -> LinearMap:
        return Negated(self)

    def __repr__(self):
        return f"{type(self).__name__}({self.input_shape} -> {self.output_shape})"


class DenseMatrix(LinearMap):
    """``x -> M @ x`` for an explicit matrix ``M``; `cols` is the block width."""

    def __init__(self, M, cols: int = 1):
        M = np.array(M, dtype=float)
        if M.ndim != 2:
            raise DimensionError("DenseMatrix needs a 2-D matrix")
        self.M = M
        self.M.setflags(write=False)
        super().__init__((M.shape[1], cols), (M.shape[0], cols))

    def _apply(self, x):
        return self.M @ x

    def _adjoint(self, y):
        return self.M.T @ y


class Identity(LinearMap):
    """Scaled identity ``x -> scale * x`` on blocks of `shape`."""

    def __init__(self, shape, scale: float = 1.0):
        self.scale = float(scale)
        super().__init__(shape, shape)

    def _apply(self, x):
        return x.copy() if self.scale == 1.0 else self.scale * x

    def _adjoint(self, y):
        return y.copy() if self.scale == 1.0 else self.scale * y

    def exact_norm(self):
        return abs(self.scale)


class Mask(LinearMap):
    """Entry selection ``P_Omega``: picks the entries listed in `omega`.

    `omega` is a pair ``(rows, cols)`` of equal-length integer arrays or a
    sequence of ``(i, j)`` pairs; the output is a column in the given order.
    """

    def __init__(self, omega, shape):
        shape = tuple(int(s) for s in shape)
        if isinstance(omega, tuple) and len(omega) == 2 and np.ndim(omega[0]) == 1:
            rows, cols = (np.asarray(o, dtype=int) for o in omega)
        else:
            pairs = np.asarray(omega, dtype=int).reshape(-1, 2)
            rows, cols = pairs[:, 0], pairs[:, 1]
        if rows.shape != cols.shape:
            raise DimensionError("mask row and column index arrays differ in length")
        if rows.size == 0:
            raise InvalidInputError("mask index set is empty")
        if rows.min() < 0 or cols.min() < 0 or rows.max() >= shape[0] or cols.max() >= shape[1]:
            raise InvalidInputError(f"mask indices out of range for shape {shape}")
        flat = np.ravel_multi_index((rows, cols), shape)
        if np.unique(flat).size != flat.size:
            raise InvalidInputError("mask contains duplicate indices")
        self.rows, self.cols = rows, cols
        self._flat = flat
        super().__init__(shape, (rows.size, 1))

    def _apply(self, x):
        return x[self.rows, self.cols].reshape(-1, 1)

    def _adjoint(self, y):
        out = np.zeros(self.input_shape)
        out[self.rows, self.cols] = y[:, 0]
        return out

    def exact_norm(self):
        return 1.0


class LeftMultiply(LinearMap):
    """``Z -> X @ Z`` with `cols` columns in ``Z``."""

    def __init__(self, X, cols: int):
        X = np.array(X, dtype=float)
        self.X = X
        self.X.setflags(write=False)
        super().__init__((X.shape[1], cols), (X.shape[0], cols))

    def _apply(self, z):
        return self.X @ z

    def _adjoint(self, y):
        return self.X.T @ y


class RightMultiply(LinearMap):
    """``L -> L @ X`` with `rows` rows in ``L``."""

    def __init__(self, X, rows: int):
        X = np.array(X, dtype=float)
        self.X = X
        self.X.setflags(write=False)
        super().__init__((rows, X.shape[0]), (rows, X.shape[1]))

    def _apply(self, L):
        return L @ self.X

    def _adjoint(self, y):
        return y @ self.X.T


class Negated(LinearMap):
    """``x -> -inner(x)``."""

    def __init__(self, inner_map: LinearMap):
        self.inner = inner_map
        super().__init__(inner_map.input_shape, inner_map.output_shape)

    def _apply(self, x):
        return -self.inner._apply(x)

    def _adjoint(self, y):
        return -self.inner._adjoint(y)

    def exact_norm(self):
        return self.inner.exact_norm()


class Stacked(LinearMap):
    """Places component outputs into a flat column at fixed offsets.

    Parameters
    ----------
    components : sequence of (LinearMap, int)
        Each map shares the same input shape; its row-major flattened output
        occupies ``[offset, offset + map.output_size)`` of the result.
    total : int
        Length of the output column.  Uncovered rows are zero.
    """

    def __init__(self, components: Sequence[tuple[LinearMap, int]], total: int):
        components = [(m, int(off)) for m, off in components]
        if not components:
            raise InvalidInputError("Stacked needs at least one component")
        shape = components[0][0].input_shape
        for m, off in components:
            if m.input_shape != shape:
                raise DimensionError("stacked components must share an input shape")
            if off < 0 or off + m.output_size > total:
                raise DimensionError(f"component at offset {off} overflows length {total}")
        self.components = tuple(components)
        super().__init__(shape, (int(total), 1))

    def _apply(self, x):
        out = np.zeros(self.output_shape)
        flat = out[:, 0]
        for m, off in self.components:
            flat[off:off + m.output_size] += m._apply(x).ravel()
        return out

    def _adjoint(self, y):
        flat = y[:, 0]
        acc = None
        for m, off in self.components:
            part = m._adjoint(flat[off:off + m.output_size].reshape(m.output_shape))
            acc = part if acc is None else acc + part
        return acc


def apply(linmap: LinearMap, x: np.ndarray) -> np.ndarray:
    return linmap.apply(x)


def adjoint(linmap: LinearMap, y: np.ndarray) -> np.ndarray:
    return linmap.adjoint(y)


def op_norm(linmap: LinearMap, tol: float = POWER_TOL, max_iter: int = POWER_MAX_ITER) -> NormEstimate:
    """Estimate the largest singular value of `linmap`.

    Maps with a closed-form norm return it directly.  Otherwise runs power
    iteration on ``A^T A`` from the normalized all-ones block and stops once
    the Rayleigh quotient changes by less than ``tol`` relative to itself.
    """
    if tol <= 0:
        raise InvalidParameterError("tol must be positive")
    exact = linmap.exact_norm()
    if exact is not None:
        return NormEstimate(float(exact), True, 0)

    v = np.ones(linmap.input_shape)
    v /= np.linalg.norm(v)
    w = linmap._adjoint(linmap._apply(v))
    if np.linalg.norm(w) == 0.0:
        # all-ones lies in the null space; fall back to a fixed random start
        v = np.random.default_rng(0).standard_normal(linmap.input_shape)
        v /= np.linalg.norm(v)
        w = linmap._adjoint(linmap._apply(v))
    rq = inner(v, w)
    for it in range(1, max_iter + 1):
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return NormEstimate(0.0, True, it)
        v = w / nw
        w = linmap._adjoint(linmap._apply(v))
        rq_new = inner(v, w)
        if abs(rq_new - rq) <= tol * abs(rq_new):
            return NormEstimate(float(np.sqrt(max(rq_new, 0.0))), True, it)
        rq = rq_new
    return NormEstimate(float(np.sqrt(max(rq, 0.0))), False, max_iter)


def lift_with_sets(problem):
    """Turn set constraints ``x_i in X_i`` into extra blocks and constraints.

    Every block that carries a convex set gets an auxiliary copy
    ``x_aux in X_i`` together with the coupling row ``x_i - x_aux = 0``.
    The constraint space of the result is a flat column: the original
    right-hand side (flattened) followed by one zero segment per lifted
    block.  Original block ``i`` maps through
    ``Stacked([(A_i, 0), (I, off_i)])``; its auxiliary copy maps through
    ``Stacked([(-I, off_i)])`` and carries the indicator of ``X_i``.

    Blocks without a set are kept with ``A_i`` padded by zeros.
    """
    from .core.problem import BlockSpec, LiftInfo, Problem
    from .proxlib import Indicator

    lifted_idx = [i for i, blk in enumerate(problem.blocks) if blk.convex_set is not None]
    if not lifted_idx:
        raise InvalidInputError("lift_with_sets needs at least one block with a convex set")

    m = problem.rhs.size
    offsets = {}
    total = m
    for i in lifted_idx:
        offsets[i] = total
        total += problem.blocks[i].linmap.input_size

    new_blocks = []
    for i, blk in enumerate(problem.blocks):
        parts = [(blk.linmap, 0)]
        if i in offsets:
            parts.append((Identity(blk.linmap.input_shape), offsets[i]))
        new_blocks.append(
            BlockSpec(term=blk.term, linmap=Stacked(parts, total), x0=blk.x0, name=blk.name)
        )
    aux_of = {}
    for i in lifted_idx:
        blk = problem.blocks[i]
        shape = blk.linmap.input_shape
        aux_of[i] = len(new_blocks)
        new_blocks.append(
            BlockSpec(
                term=Indicator(blk.convex_set),
                linmap=Stacked([(Negated(Identity(shape)), offsets[i])], total),
                # the auxiliary copy starts at the same point as its original
                x0=blk.x0,
                name=f"{blk.name or i}_aux",
            )
        )

    rhs = np.zeros((total, 1))
    rhs[:m, 0] = problem.rhs.ravel()
    info = LiftInfo(n_original=len(problem.blocks), aux_of=aux_of, rhs_size=m, rhs_shape=problem.rhs.shape)
    return Problem(new_blocks, rhs, lift=info)

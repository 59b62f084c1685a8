"""Problem container: ``min sum_i f_i(x_i)  s.t.  sum_i A_i(x_i) = b``."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..exceptions import DimensionError, InvalidInputError
from ..linops import LinearMap, as_block
from ..proxlib import ConvexSet, Term


@dataclass(frozen=True)
class BlockSpec:
    """One variable block: its term, its map and its starting point.

    `x0` defaults to zeros of the map's input shape.
    """

    term: Term
    linmap: LinearMap
    x0: np.ndarray | None = None
    convex_set: ConvexSet | None = None
    name: str = ""

    def __post_init__(self):
        if self.x0 is None:
            object.__setattr__(self, "x0", np.zeros(self.linmap.input_shape))
        else:
            object.__setattr__(self, "x0", as_block(self.x0, self.linmap.input_shape))

    @property
    def shape(self):
        return self.linmap.input_shape


@dataclass(frozen=True)
class LiftInfo:
    """Bookkeeping for a problem produced by :func:`~ladmpsap.linops.lift_with_sets`."""

    n_original: int
    aux_of: dict = field(default_factory=dict)  # original index -> auxiliary index
    rhs_size: int = 0
    rhs_shape: tuple = ()


class Problem:
    """Blocks plus right-hand side, validated once on construction.

    The onto-ness of ``x -> sum_i A_i(x_i)`` is assumed, not checked.
    """

    def __init__(self, blocks, rhs, lift: LiftInfo | None = None):
        blocks = list(blocks)
        if not blocks:
            raise InvalidInputError("a problem needs at least one block")
        self.rhs = as_block(rhs)
        for i, blk in enumerate(blocks):
            if blk.linmap.output_shape != self.rhs.shape:
                raise DimensionError(
                    f"block {i} maps into {blk.linmap.output_shape}, rhs has shape {self.rhs.shape}"
                )
        self.blocks = blocks
        self.lift = lift

    @property
    def n(self) -> int:
        return len(self.blocks)

    @property
    def maps(self) -> list[LinearMap]:
        return [b.linmap for b in self.blocks]

    @property
    def terms(self) -> list[Term]:
        return [b.term for b in self.blocks]

    @property
    def has_sets(self) -> bool:
        return any(b.convex_set is not None for b in self.blocks)

    def residual(self, x) -> np.ndarray:
        """``sum_i A_i(x_i) - b``."""
        acc = -self.rhs
        for blk, xi in zip(self.blocks, x):
            acc = acc + blk.linmap.apply(xi)
        return acc

    def objective(self, x) -> float:
        return float(sum(blk.term.value(xi) for blk, xi in zip(self.blocks, x)))

    def initial_point(self) -> list[np.ndarray]:
        return [b.x0.copy() for b in self.blocks]

    def __repr__(self):
        return f"Problem(n={self.n}, rhs={self.rhs.shape}, lifted={self.lift is not None})"

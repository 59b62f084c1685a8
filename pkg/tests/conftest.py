import numpy as np
import pytest

from ladmpsap import BlockSpec, Problem
from ladmpsap.linops import DenseMatrix
from ladmpsap.proxlib import ShiftedSquare


def scalar_qp(c1=1.0, c2=1.0, b=1.0):
    """``min 1/2 (x1 - c1)^2 + 1/2 (x2 - c2)^2  s.t.  x1 + x2 = b``."""
    return Problem(
        [BlockSpec(ShiftedSquare(np.full((1, 1), c)), DenseMatrix(np.ones((1, 1)))) for c in (c1, c2)],
        np.full((1, 1), b),
    )


def random_qp(seed, n=None, max_dim=10):
    """Equality-constrained quadratic with Gaussian maps; onto with probability one."""
    rng = np.random.default_rng(seed)
    n = n or (2, 3, 5)[seed % 3]
    m = int(rng.integers(1, 6))
    blocks = []
    for _ in range(n):
        d = int(rng.integers(1, max_dim + 1))
        blocks.append(
            BlockSpec(
                ShiftedSquare(rng.standard_normal((d, 1)), rng.uniform(0.5, 2.0)),
                DenseMatrix(rng.standard_normal((m, d))),
            )
        )
    return Problem(blocks, rng.standard_normal((m, 1)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

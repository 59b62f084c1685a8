"""Solver configuration: variants, penalty schedule and tolerances."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Sequence, Union

import numpy as np

from ..exceptions import InvalidParameterError


class Variant(str, enum.Enum):
    LADMPSAP = "ladmpsap"
    LADMPS_FIXED_BETA = "ladmps"
    NAIVE_LADM = "naive"
    PRACTICAL = "practical"
    PROXIMAL = "proximal"


class Status(str, enum.Enum):
    CONVERGED = "converged"
    MAX_ITER = "max_iter"
    DIVERGED = "diverged"
    NUMERIC_ERROR = "numeric_error"


AUTO = "auto"


@dataclass(frozen=True)
class PenaltySchedule:
    """``beta_{k+1} = min(beta_max, rho * beta_k)``.

    ``rho = rho0`` when the update residual drops below `eps2`, else 1.
    ``beta0=None`` selects ``alpha * m * eps2`` with ``m`` the number of
    constraint rows.  ``beta_max=math.inf`` is the unbounded mode; it is only
    justified when every term has bounded subgradients, which is not checked.
    """

    beta0: float | None = None
    beta_max: float = 1e10
    rho0: float = 10.0
    eps2: float = 1e-4
    alpha: float = 1.0

    def __post_init__(self):
        if self.beta0 is not None and self.beta0 <= 0:
            raise InvalidParameterError("beta0 must be positive")
        if self.rho0 <= 1:
            raise InvalidParameterError("rho0 must exceed 1")
        if not 0 < self.eps2 < 1:
            raise InvalidParameterError("eps2 must lie in (0, 1)")
        if self.beta_max <= 0:
            raise InvalidParameterError("beta_max must be positive")
        if self.alpha <= 0:
            raise InvalidParameterError("alpha must be positive")

    @property
    def unbounded(self) -> bool:
        return math.isinf(self.beta_max)

    def initial_beta(self, m: int) -> float:
        beta = self.beta0 if self.beta0 is not None else self.alpha * m * self.eps2
        return min(beta, self.beta_max)


@dataclass(frozen=True)
class SolverConfig:
    """Everything :func:`~ladmpsap.core.solve` needs besides the problem.

    Parameters
    ----------
    eta : "auto" or sequence of float
        Per-block linearization constants.  With ``"auto"`` they are set to
        ``eta_margin`` times the variant's lower bound.  For a lifted problem
        the sequence covers the lifted blocks.
    prox_constants : "auto" or sequence of float
        ``T_i`` of the proximal variant; ``"auto"`` uses each smooth part's
        Lipschitz bound.
    update_residual : {"auto", "step", "gradient"}
        Which quantity drives the penalty rule and the second stopping test:
        ``step`` is ``beta_k max_i sqrt(eta_i) ||dx_i||``, ``gradient`` the
        KKT-derived residual of the proximal variant.  ``auto`` picks
        ``gradient`` for the proximal variant and ``step`` otherwise.
    stopping_residual : {"auto", "plain"}
        Quantity compared with ``eps2`` in the stopping test.  ``auto`` reuses
        the update residual; ``plain`` is the unscaled relative step
        ``max_i ||dx_i|| / max(||b||, 1)``, which does not grow with the
        penalty and so treats fixed and adaptive penalties alike.  The penalty
        rule always uses the update residual.
    stop_eps2 : float, optional
        Threshold of the second stopping test.  Defaults to the schedule's
        ``eps2``, which also gates penalty growth; set it separately to
        stop on a tighter tolerance without starving the penalty rule.
    """

    schedule: PenaltySchedule = field(default_factory=PenaltySchedule)
    eps1: float = 1e-3
    eta: Union[str, Sequence[float]] = AUTO
    max_iter: int = 1000
    variant: Variant = Variant.LADMPSAP
    lambda0: np.ndarray | None = None
    eta_margin: float = 1.02
    prox_constants: Union[str, Sequence[float]] = AUTO
    update_residual: str = AUTO
    stopping_residual: str = AUTO
    stop_eps2: float | None = None
    record_diagnostics: bool = False
    record_iterates: bool = False
    divergence_factor: float = 1e6
    enforce_eta_bounds: bool = True
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if self.eps1 <= 0:
            raise InvalidParameterError("eps1 must be positive")
        if self.max_iter < 1:
            raise InvalidParameterError("max_iter must be at least 1")
        if self.eta_margin <= 1:
            raise InvalidParameterError("eta_margin must exceed 1 for the strict bounds")
        if self.update_residual not in (AUTO, "step", "gradient"):
            raise InvalidParameterError(f"unknown update_residual {self.update_residual!r}")
        if self.stopping_residual not in (AUTO, "plain"):
            raise InvalidParameterError(f"unknown stopping_residual {self.stopping_residual!r}")
        if self.stop_eps2 is not None and self.stop_eps2 <= 0:
            raise InvalidParameterError("stop_eps2 must be positive")
        if self.workers < 1:
            raise InvalidParameterError("workers must be at least 1")

    @property
    def eps2(self) -> float:
        """Threshold of the second stopping test."""
        return self.schedule.eps2 if self.stop_eps2 is None else self.stop_eps2

    def residual_kind(self) -> str:
        if self.update_residual != AUTO:
            return self.update_residual
        return "gradient" if self.variant is Variant.PROXIMAL else "step"

    def with_(self, **changes) -> SolverConfig:
        return replace(self, **changes)

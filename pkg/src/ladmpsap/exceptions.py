"""Exception types raised across the package."""


class LadmpsapError(Exception):
    """Base class for all package errors."""


class DimensionError(LadmpsapError, ValueError):
    """Shapes of operands do not conform."""


class InvalidParameterError(LadmpsapError, ValueError):
    """A scalar parameter lies outside its admissible range."""


class InvalidInputError(LadmpsapError, ValueError):
    """Input data violates a documented precondition."""


class NumericError(LadmpsapError, ArithmeticError):
    """A numerical kernel (SVD, linear solve) failed."""


class RankDeficiencyError(NumericError):
    """A KKT system is singular."""


class UnsupportedError(LadmpsapError, NotImplementedError):
    """The requested operation is not available for this input."""

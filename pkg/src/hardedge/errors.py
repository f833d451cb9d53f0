"""Exception types shared across the package."""

from .quadrature import IntegrandError, QuadratureWarning, SeriesDivergenceError
from .specfun import PoleError

__all__ = [
    "PoleError",
    "IntegrandError",
    "QuadratureWarning",
    "SeriesDivergenceError",
    "UnsupportedConfiguration",
    "ConditioningError",
    "RepresentationMismatch",
    "RealRootsViolation",
    "ContinuationError",
    "ConfigurationError",
]


class UnsupportedConfiguration(ValueError):
    """A kernel was requested in a parameter range it cannot be evaluated in."""


class ConditioningError(ArithmeticError):
    """Cancellation or overflow would exceed double precision.

    Attributes
    ----------
    log_magnitude : float
        The offending log-magnitude (or spread of log-magnitudes).
    """

    def __init__(self, message: str, log_magnitude: float):
        super().__init__(f"{message} (log-magnitude {log_magnitude:.1f})")
        self.log_magnitude = log_magnitude


class RepresentationMismatch(RuntimeError):
    """Two representations of the same kernel disagree."""


class RealRootsViolation(ArithmeticError):
    """A polynomial flagged as real-rooted produced non-real roots."""


class ContinuationError(ArithmeticError):
    """Newton continuation failed to converge for a path step."""


class ConfigurationError(ValueError):
    """An ensemble specification violates one of its invariants."""

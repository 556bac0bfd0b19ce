"""Exception hierarchy shared by all freeito modules."""


class FreeItoError(Exception):
    """Base class for every error raised by freeito."""


class ValidationError(FreeItoError, ValueError):
    """Malformed input object (partition, step function, cumulant file, ...)."""


class SizeError(FreeItoError, ValueError):
    """A size parameter is outside the supported range."""


class TruncationError(FreeItoError, IndexError):
    """A quantity beyond the stored truncation order was requested."""


class DomainError(FreeItoError, ValueError):
    """An argument lies outside the mathematical domain of the operation."""


class RegimeError(FreeItoError, ValueError):
    """The operation requires non-negative free cumulants."""


class ConvergenceError(FreeItoError, ArithmeticError):
    """An iterative numerical solver failed to reach its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class CalibrationError(FreeItoError, ArithmeticError):
    """A numerically integrated distribution does not carry unit mass."""


class AdaptednessError(FreeItoError, RuntimeError):
    """A biprocess rule tried to read path data from the future."""

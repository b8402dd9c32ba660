"""Exception types shared across the package."""


class SgnlsError(Exception):
    """Base class for all package errors."""


class CapacityError(SgnlsError):
    """Requested refinement level exceeds the configured maximum."""


class LevelError(SgnlsError):
    """Level mismatch between a function / basis and the requested operation."""


class DomainError(SgnlsError):
    """Numerical input outside the mathematical domain of an operation."""


class ForbiddenEigenvalueError(SgnlsError):
    """Eigenfunction extension attempted with a forbidden graph eigenvalue."""


class PreconditionError(SgnlsError):
    """An operation's stated precondition failed a runtime check."""


class ConstructionError(SgnlsError):
    """A construction invariant (e.g. seed residual) failed."""


class ConvergenceError(SgnlsError):
    """An iterative numerical procedure failed to converge."""


class StepSizeError(SgnlsError):
    """Time step too large for the nonlinear-phase guard of the solver."""


class BlowUpError(SgnlsError):
    """Solver produced non-finite values; carries the last valid time."""

    def __init__(self, message, last_valid_time=None):
        super().__init__(message)
        self.last_valid_time = last_valid_time


class CacheError(SgnlsError):
    """Basis cache file is corrupted, truncated or incompatible."""


class ConfigError(SgnlsError):
    """Invalid experiment or CLI configuration."""

"""Exception hierarchy.

Every error raised on purpose by the package derives from :class:`DZOError`.
The CLI maps the subclasses onto exit codes (see ``dzo.cli``).
"""


class DZOError(Exception):
    """Base class for all package errors."""


class ConfigError(DZOError, ValueError):
    """Invalid parameters or configuration (CLI exit code 1)."""


class InvalidDimensionError(ConfigError):
    pass


class UnsupportedSmoothnessError(ConfigError):
    pass


class ShapeError(ConfigError):
    pass


class DomainError(ConfigError):
    pass


class SpectrumError(ConfigError):
    pass


class ScheduleError(ConfigError):
    pass


class FitError(ConfigError):
    pass


class UnavailableOptimumError(ConfigError):
    pass


class ValidationFailure(DZOError):
    """An invariant check failed (CLI exit code 2)."""


class NumericalError(DZOError, ArithmeticError):
    """Runtime numerical failure (CLI exit code 3)."""


class ConstructionFailedError(NumericalError):
    pass


class ConnectivityError(NumericalError):
    pass


class SequenceExhaustedError(NumericalError, IndexError):
    pass


class DivergenceError(NumericalError):
    """Iterates blew up; ``last_state`` holds the last finite agent states."""

    def __init__(self, message, last_state=None, t=None):
        super().__init__(message)
        self.last_state = last_state
        self.t = t

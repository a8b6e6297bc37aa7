"""Exception types raised by the solvers and the CLI."""


class StorageCoopError(Exception):
    """Base class for all package errors."""


class DimensionError(StorageCoopError, ValueError):
    """Array shapes of the inputs do not agree."""


class SingularMatrix(StorageCoopError, ArithmeticError):
    """A pivot fell below the singularity threshold during elimination."""


class NonConvergence(StorageCoopError, ArithmeticError):
    """An iterative routine hit its iteration cap."""


class DegeneratePeriod(StorageCoopError, ArithmeticError):
    """Artificial cost synthesis hit a zero target it could not resolve."""


class BoxViolation(StorageCoopError, ValueError):
    """A tariff leaves its price bounds.

    ``feasible`` carries the interval of transfer values that would keep the
    tariff inside the bounds (``None`` when that interval is empty).
    """

    def __init__(self, message, feasible=None):
        super().__init__(message)
        self.feasible = feasible


class NoSurplus(StorageCoopError, ValueError):
    """There is no positive joint profit to bargain over."""


class ConfigError(StorageCoopError, ValueError):
    """Invalid scenario configuration."""


class ParseError(ConfigError):
    """Malformed price series file."""

    def __init__(self, line, reason):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason

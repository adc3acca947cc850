"""Exception hierarchy shared by the numerical modules and the CLI."""


class ParisiChaosError(Exception):
    """Base class for library errors."""

    exit_code = 1


class InvalidArgumentError(ParisiChaosError, ValueError):
    exit_code = 1


class ConfigError(ParisiChaosError, ValueError):
    exit_code = 1


class NumericalFailure(ParisiChaosError, ArithmeticError):
    """Non-finite values appeared during a recursion.

    ``level`` names the recursion level (or PDE interval) that failed.
    """

    exit_code = 4

    def __init__(self, message, level=None):
        super().__init__(message)
        self.level = level


class NoBracketError(ParisiChaosError):
    """Endpoint signs do not bracket a root."""

    exit_code = 4

    def __init__(self, message, f_lo, f_hi):
        super().__init__(message)
        self.f_lo = f_lo
        self.f_hi = f_hi


class CapacityError(ParisiChaosError):
    exit_code = 3


class DegenerateMeasureError(ParisiChaosError):
    exit_code = 4

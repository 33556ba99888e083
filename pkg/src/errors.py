"""
Exception hierarchy. Each error knows the process exit code the CLI reports.
"""


class BenchError(Exception):
    """Base class for every error raised by the bench."""
    exit_code = 1


class ValidationError(BenchError, ValueError):
    """Parameters that violate a domain invariant."""
    exit_code = 2


class RegimeError(ValidationError):
    """An approximation was requested outside the regime where it holds."""


class OracleRangeError(ValidationError):
    """The exhaustive oracle was asked for a tally range it will not enumerate."""


class NumericalError(BenchError):
    exit_code = 3


class QuadratureError(NumericalError):
    """Adaptive quadrature hit its depth limit before meeting the tolerance."""

    def __init__(self, message, partial, abs_error):
        super().__init__(message)
        self.partial = partial
        self.abs_error = abs_error


class CoverageError(NumericalError):
    """A posterior grid leaves too much probability mass outside its span."""

    def __init__(self, message, mass_outside):
        super().__init__(message)
        self.mass_outside = mass_outside


class OutputError(BenchError):
    exit_code = 4

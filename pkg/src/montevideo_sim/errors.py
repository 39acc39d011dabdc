"""
Exception hierarchy for montevideo-sim.

Every error carries a machine-readable ``code`` and the process exit status
the CLI reports for it.
"""

from typing import Optional


class MontevideoError(Exception):
    """Base class for all library errors."""

    code = "internal_error"
    exit_code = 1

    def __init__(self, message: str, *, context: Optional[str] = None):
        self.message = message
        self.context = context
        super().__init__(message if not context else f"{context}: {message}")


class ConfigError(MontevideoError):
    """Raised when a configuration file cannot be parsed or validated."""

    code = "config_error"
    exit_code = 2

    def __init__(
        self,
        message: str,
        *,
        line: Optional[int] = None,
        column: Optional[int] = None,
        context: Optional[str] = None,
    ):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message, context=context)


class UsageError(ConfigError):
    """Raised on CLI misuse or invalid plotting input."""

    code = "usage_error"


class NumericalError(MontevideoError):
    """Raised when a numerical routine fails or violates an invariant."""

    code = "numerical_error"
    exit_code = 3


class QuadratureError(NumericalError):
    """Adaptive quadrature did not reach the requested agreement."""


class IntegratorError(NumericalError):
    """The master-equation integrator failed or broke an invariant."""


class StiffSystemError(IntegratorError):
    """The integrator step size underflowed."""


class WindowConvergenceError(NumericalError):
    """Doubling the integration window changed the result too much."""


class ClockNeverReadsError(NumericalError):
    """The clock has (numerically) zero probability of the requested reading."""


class CapacityError(MontevideoError):
    """Raised when a dense object would exceed the configured capacity."""

    code = "capacity_error"
    exit_code = 4


class DomainError(MontevideoError, ValueError):
    """An argument lies outside the mathematical domain of a function."""

    code = "domain_error"
    exit_code = 3


class StructuralError(MontevideoError, ValueError):
    """Shapes, dimensions or value-type invariants are inconsistent."""

    code = "structural_error"
    exit_code = 3

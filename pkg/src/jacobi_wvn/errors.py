"""Exception types shared across the package.

Each class carries the CLI exit code it maps to.
"""


class JacobiError(Exception):
    exit_code = 1


class ValidationError(JacobiError, ValueError):
    """Malformed input: bad coefficients, lengths, or config fields."""

    exit_code = 2


class DomainError(JacobiError, ValueError):
    """Input outside the region where an operation is defined."""

    exit_code = 3


class NumericalError(JacobiError, ArithmeticError):
    """Non-finite values or overflow during iteration."""

    exit_code = 4

    def __init__(self, message, position=None):
        super().__init__(message)
        self.position = position


class DegeneracyError(JacobiError):
    """A construction stayed degenerate after all retries."""

    exit_code = 5

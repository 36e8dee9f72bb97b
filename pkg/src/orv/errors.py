"""Exception types raised across the package."""


class OrvError(Exception):
    """Base class for all package errors."""


class DomainError(OrvError, ValueError):
    """An argument lies outside the domain of the operation."""


class DivergenceError(OrvError, ArithmeticError):
    """A required integral or moment is infinite."""


class NumericalFailure(OrvError, ArithmeticError):
    """An iterative or adaptive numerical routine failed to converge."""


class ConfigError(OrvError):
    """Malformed scenario configuration.

    ``field`` is a dotted path to the offending entry (``scenarios[0].model.shapes``)
    when one can be named.
    """

    def __init__(self, message, field=None):
        self.field = field
        if field:
            message = f"{field}: {message}"
        super().__init__(message)

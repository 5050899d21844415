"""Exception types shared across the package."""

from __future__ import annotations


class ProcdepError(Exception):
    """Base class for all domain errors raised by this package."""


class InconsistentTransition(ProcdepError):
    """A state change is not applicable to the entity's current existence state."""

    def __init__(self, state, change):
        self.state = state
        self.change = change
        super().__init__(f"cannot apply {change.value} to an entity in state {state.name}")


class DimensionMismatch(ProcdepError):
    """Matrix shape disagrees with the process it is checked against."""


class ValidationError(ProcdepError):
    """Semantic validation failed; carries one message per violation."""

    def __init__(self, message: str, violations: tuple[str, ...] = ()):
        self.violations = tuple(violations)
        detail = "" if not self.violations else "\n  " + "\n  ".join(self.violations)
        super().__init__(message + detail)


class ParseError(ProcdepError):
    """A file could not be parsed; position information goes in the message."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NormalizationError(ProcdepError):
    """Log-probabilities do not form a normalized distribution."""


class InvalidMatrix(ProcdepError):
    """An operation received a matrix that fails consistency validation."""


class ConfigError(ProcdepError):
    """Invalid hyperparameter or run configuration."""


class TooLarge(ProcdepError):
    """Problem size exceeds the guard for exhaustive enumeration."""


class ProcessMismatch(ProcdepError):
    """Prediction and gold sides reference different process sets."""

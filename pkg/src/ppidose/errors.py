"""Exception types shared across the package."""


class PpidoseError(Exception):
    """Base class for all package errors."""


class ConfigurationError(PpidoseError):
    """A configuration value is invalid (bad range, unknown key, ...)."""


class ShapeMismatchError(PpidoseError):
    """Array arguments have inconsistent shapes."""

    def __init__(self, message: str, expected=None, actual=None):
        if expected is not None or actual is not None:
            message = f"{message} (expected {expected}, got {actual})"
        super().__init__(message)
        self.expected = expected
        self.actual = actual


class NumericalInstabilityError(PpidoseError):
    """An integration step produced a non-finite value."""

    def __init__(self, field: str, value: float):
        super().__init__(f"non-finite value in state field {field!r}: {value!r}")
        self.field = field
        self.value = value


class TrainingDivergedError(PpidoseError):
    """Training loss became non-finite."""

    def __init__(self, loss: float, epoch: int | None = None):
        at = f" at epoch {epoch}" if epoch is not None else ""
        super().__init__(f"training diverged{at} (loss={loss!r})")
        self.epoch = epoch
        self.loss = loss


class EvaluationError(PpidoseError):
    """A benchmark evaluation was asked to compare incomplete results."""

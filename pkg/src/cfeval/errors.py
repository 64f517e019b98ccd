"""Exception types raised across the package."""


class DomainError(ValueError):
    """Input falls outside the domain an operation is defined on."""


class SizeError(ValueError):
    """An action space is too large to enumerate."""


class DataIntegrityError(ValueError):
    """Logged data violates an invariant (e.g. a non-positive propensity)."""


class InsufficientDataError(ValueError):
    """A record lacks a field the requested computation needs."""


class AlignmentError(ValueError):
    """Online and offline results refer to different periods."""


class LogFormatError(ValueError):
    """A serialized log or document could not be parsed."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)

"""Exception types shared across the package."""


class SlipnetError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(SlipnetError, ValueError):
    """A caller-supplied parameter violates an operation's contract."""


class InvalidSequenceError(SlipnetError, ValueError):
    """A tactile sequence violates its structural invariants."""


class SequenceTooShortError(InvalidSequenceError):
    """An operation would leave fewer frames than the two-window minimum."""


class DataFormatError(SlipnetError, ValueError):
    """A file or record does not match the expected schema."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class UnsupportedVersionError(DataFormatError):
    """A serialized artifact declares a format version we cannot read."""


class NumericError(SlipnetError, ArithmeticError):
    """A numeric computation produced non-finite values."""

"""Exception hierarchy. CLI maps BlockpoolError to exit code 1, usage errors to 2."""


class BlockpoolError(Exception):
    """Base class for all toolkit errors."""


class ArgumentError(BlockpoolError):
    """A function was called with an invalid argument value."""


class DataError(BlockpoolError):
    """Input data violates a contract (mismatched files, empty corpus, bad labels)."""


class DimensionError(BlockpoolError):
    """Tensor or segmentation shapes are incompatible."""


class LengthError(BlockpoolError):
    """A sequence exceeds a hard length limit (e.g. max positions)."""


class ConfigError(BlockpoolError):
    """Inconsistent or unknown configuration."""


class ParseError(BlockpoolError):
    """A file could not be parsed; carries a line number where known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class StateError(BlockpoolError):
    """Operation requires state that is missing (e.g. untrained vocabulary)."""


class EncodingError(BlockpoolError):
    """Text could not be encoded to UTF-8 bytes."""


class NumericError(BlockpoolError):
    """A forward op produced NaN/Inf from finite inputs (debug mode check)."""


class TrainingError(BlockpoolError):
    """Training aborted (e.g. NaN loss); carries the step number in the message."""


class DecodeError(BlockpoolError):
    """A byte stream is not valid UTF-8."""

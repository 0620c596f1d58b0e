"""Exception types shared across the toolkit."""


class ValidationError(ValueError):
    """An input violates a documented contract (shape, range, format)."""


class NumericError(ArithmeticError):
    """A computation produced non-finite values (solver divergence, overflow)."""


class FileFormatError(ValidationError):
    """A binary or text artifact does not match its declared format."""


class BadMagicError(FileFormatError):
    """File does not start with the expected magic bytes."""


class TruncatedFileError(FileFormatError):
    """File ended before the declared header or payload was complete."""


class SizeMismatchError(FileFormatError):
    """Header-declared payload size disagrees with the actual payload."""


class MissingTensorError(FileFormatError):
    """A weight file lacks a tensor required by the network configuration."""


class TensorShapeError(FileFormatError):
    """A stored tensor's shape disagrees with the network configuration."""

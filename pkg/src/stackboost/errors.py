"""Exception types raised across the library."""


class StackboostError(Exception):
    """Base class for all library errors."""


class DimensionMismatchError(StackboostError, ValueError):
    """A vector or matrix has the wrong width for the receiving model."""


class ShapeMismatchError(StackboostError, ValueError):
    """Two arrays that must share a shape do not."""


class EmptyInputError(StackboostError, ValueError):
    """An operation received zero samples."""


class NonFiniteInputError(StackboostError, ValueError):
    """Input contains NaN or infinity."""


class NonFiniteResultError(StackboostError, ArithmeticError):
    """A probed function evaluated to NaN or infinity."""


class SingularSystemError(StackboostError, ArithmeticError):
    """Unregularized normal equations are rank-deficient."""


class InvalidOneHotError(StackboostError, ValueError):
    """Classification targets are not one-hot rows."""


class NonFiniteLossError(StackboostError, ArithmeticError):
    """Training loss became NaN or infinite.

    Carries the 1-based epoch at which the blow-up was detected.
    """

    def __init__(self, message: str, epoch: int):
        super().__init__(message)
        self.epoch = epoch


class InvalidKError(StackboostError, ValueError):
    """Fold count is not usable for the given sample count."""


class CsvParseError(StackboostError, ValueError):
    """A delimited text file failed to parse.

    Carries 1-based ``row`` and the offending ``column`` name when known.
    """

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        super().__init__(message)
        self.row = row
        self.column = column


class VersionMismatchError(StackboostError, ValueError):
    """A model file declares a format version newer than this library."""


class ConfigError(StackboostError, ValueError):
    """A run configuration failed validation."""

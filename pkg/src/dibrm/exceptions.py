"""Exception hierarchy shared across the package."""


class DIBRMError(Exception):
    """Base class for all errors raised by :mod:`dibrm`."""


class CorruptLogError(DIBRMError, ValueError):
    """An event or vote stream is out of timestamp order."""


class NumericOverflowError(DIBRMError, ArithmeticError):
    """A trust value stopped being finite."""


class InvalidQueryError(DIBRMError, ValueError):
    """A reputation query precedes the user's last interaction."""


class ConfigurationError(DIBRMError, ValueError):
    """Bad rule table, sweep config or model parameters."""


class IngestQualityError(DIBRMError):
    """Too many malformed rows in a dump file."""

    def __init__(self, message, stats=None):
        super().__init__(message)
        self.stats = stats


class SamplingError(DIBRMError, ValueError):
    """A stratified sample could not be drawn."""

    def __init__(self, message, occupancy=None):
        super().__init__(message)
        self.occupancy = occupancy


class DataError(DIBRMError, ValueError):
    """Non-finite or otherwise unusable reputation values."""


class DimensionMismatchError(DIBRMError, ValueError):
    """Rank tables that cannot be compared."""

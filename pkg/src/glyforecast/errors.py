"""Exception hierarchy shared across the package."""


class GlyforecastError(Exception):
    """Base class for all package errors."""


class ConfigError(GlyforecastError, ValueError):
    """Invalid configuration, hyperparameters or CLI flags."""


class DataError(GlyforecastError, ValueError):
    """Input data is malformed or unusable."""


class InsufficientDataError(DataError):
    """Not enough samples for the requested operation.

    Attributes
    ----------
    required : int or None
        Minimum number of samples the operation needs, when known.
    available : int or None
        Number of samples that were actually supplied.
    """

    def __init__(self, message, required=None, available=None):
        super().__init__(message)
        self.required = required
        self.available = available


class NoPairsError(InsufficientDataError):
    """A window is too short to yield a single (lags -> target) pair."""

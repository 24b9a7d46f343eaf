"""Exception hierarchy, mapped onto CLI exit codes by steelprop.cli."""


class SteelpropError(Exception):
    """Base class for all package errors."""


class UsageError(SteelpropError):
    """Bad invocation or configuration (exit code 1)."""


class DataError(SteelpropError):
    """Malformed or unreadable input data (exit code 2)."""


class ValidationError(DataError):
    """Structurally valid input that breaks a domain invariant (exit code 2)."""


class NumericalError(SteelpropError):
    """Numerical failure: divergence, singular system (exit code 3)."""


class DivergenceError(NumericalError):
    """Training loss became non-finite; carries the epoch history."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = history if history is not None else []

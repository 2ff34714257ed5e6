"""Shared exception types."""


class HetQoSError(Exception):
    """Base class for package errors."""


class ConfigError(HetQoSError):
    """Invalid configuration; carries the dotted field path when known."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class QuadratureError(HetQoSError):
    """Adaptive quadrature failed to converge.

    Carries the best available estimate and the achieved error bound so
    callers can decide whether to proceed.
    """

    def __init__(self, message, value=None, error=None):
        self.value = value
        self.error = error
        super().__init__(message)


class UnstableQueueError(HetQoSError):
    """Queue evaluation requested outside its stability region."""

    def __init__(self, message, total_load=None, critical_load=None):
        self.total_load = total_load
        self.critical_load = critical_load
        super().__init__(message)


class InsufficientSamplesError(HetQoSError):
    """A conditional Monte Carlo estimate had too few event hits."""

    def __init__(self, message, hits=0):
        self.hits = hits
        super().__init__(message)

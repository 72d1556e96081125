"""Exception and warning types shared across the package."""


class HDMAError(Exception):
    """Base class for package errors."""


class DataError(HDMAError, ValueError):
    """Malformed input data (missing file, bad cell, dimension mismatch)."""


class ConfigError(HDMAError, ValueError):
    """Invalid configuration value; the message names the offending field."""


class NumericalError(HDMAError, RuntimeError):
    """A numerical routine failed in a way the caller must act on."""


class ConvergenceWarning(UserWarning):
    """An iterative solver stopped before meeting its tolerance."""

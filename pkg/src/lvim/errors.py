"""Exception hierarchy shared across the package."""


class LvimError(Exception):
    """Base class for all package errors."""


class DataValidationError(LvimError, ValueError):
    """Input data violates a structural or value invariant."""


class MeasurementError(LvimError, ValueError):
    """A predictiveness measure is undefined on the supplied data."""


class UnsupportedInferenceError(LvimError):
    """Inference was requested for a summary whose influence function is unavailable."""


class ConfigError(LvimError, ValueError):
    """A configuration file or CLI flag is invalid."""

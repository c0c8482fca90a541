"""Exception types shared across the package."""


class DataError(ValueError):
    """Malformed or out-of-range trigger data."""


class ConfigError(ValueError):
    """Invalid configuration or window specification."""


class UnfitError(ValueError):
    """Raised when hyperparameters cannot be estimated from the data."""


class InitializationError(RuntimeError):
    """Optimizer could not find a single finite starting point."""

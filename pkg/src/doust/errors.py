"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid dimensions, topology, or hyperparameter settings."""


class InvalidScoreError(ValueError):
    """A score vector handed to a loss or metric contains non-finite values."""


class SchemaError(ValueError):
    """A dataset file does not match the expected CSV schema."""


class StratificationError(ValueError):
    """Cross-validation folds cannot be built with both classes present."""


class EnsembleFailureError(RuntimeError):
    """Every submodel of an ensemble failed to train."""

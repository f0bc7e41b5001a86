"""Exception types shared across the package."""


class MiccanError(Exception):
    """Base class for all package-specific errors."""


class InvalidInputError(MiccanError, ValueError):
    """Raised when an operation receives data violating its preconditions."""


class InvalidConfigError(MiccanError, ValueError):
    """Raised when a configuration object is internally inconsistent."""


class InfeasibleSpecError(InvalidConfigError):
    """Raised when a sampling specification cannot be satisfied."""


class NumericalFailureError(MiccanError, RuntimeError):
    """Raised when an iterative solver or training loop diverges."""


class UndefinedMetricError(MiccanError, ValueError):
    """Raised when a metric is undefined for the given reference image."""


class IngestionError(MiccanError, RuntimeError):
    """Raised when a dataset file cannot be read or parsed."""


class EmptyManifestError(IngestionError):
    """Raised when dataset ingestion finds no usable images."""

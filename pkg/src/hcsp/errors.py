"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataIOError -> 3,
ModelError -> 4.
"""


class HcspError(Exception):
    """Base class for all package errors."""


class ConfigError(HcspError):
    """A parameter or configuration value violates a precondition."""


class DataIOError(HcspError):
    """A data file is missing, unreadable, or unwritable."""


class SchemaError(DataIOError):
    """Manifest or file contents do not match the expected schema."""


class ModelError(HcspError):
    """Model and data are incompatible, or the model itself is unusable."""


class TrainingError(ModelError):
    """Training preconditions violated (empty category, too few samples)."""


class DegenerateTrialError(ModelError):
    """Trial data carries no usable signal (zero energy or variance)."""


class NumericalError(ModelError):
    """Numerical failure beyond what regularization can absorb."""

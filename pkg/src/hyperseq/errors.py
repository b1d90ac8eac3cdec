"""Exception types shared across the package.

The CLI maps these onto its exit-code contract: configuration and usage
problems exit 1, malformed data or model files exit 2, anything else 3.
"""


class HyperseqError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(HyperseqError):
    """Invalid configuration value or combination."""


class DimensionError(HyperseqError):
    """Invalid or mismatched vector dimensionality."""


class ZeroNormError(HyperseqError):
    """Similarity or decoding was attempted on an all-zero vector."""


class DuplicateLabelError(HyperseqError):
    """Two identical labels were offered to one codebook."""


class UnknownLabelError(HyperseqError):
    """A state label has no codebook entry."""


class EmptyCodebookError(HyperseqError):
    """Decoding was attempted against a codebook with no entries."""


class ArityError(HyperseqError):
    """A window or prefix has the wrong number of elements."""


class AdaptationDisabledError(HyperseqError):
    """Online adaptation was requested on a model configured without it."""


class EmptyTrainingError(HyperseqError):
    """No training session was long enough to produce a single window."""


class DataFormatError(HyperseqError):
    """Malformed dataset or chain-spec file; message carries the location."""


class EmptyDatasetError(HyperseqError):
    """Ingestion or filtering left no usable sessions."""


class InsufficientUsersError(HyperseqError):
    """A split strategy needs more distinct users than the dataset has."""


class InsufficientSessionsError(HyperseqError):
    """A per-user split found a user with too few sessions."""


class ModelFormatError(HyperseqError):
    """Corrupt or unreadable model file; message names the failing field."""


class ConvergenceError(HyperseqError):
    """An iterative computation exceeded its iteration budget."""

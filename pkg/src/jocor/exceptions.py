"""Error types raised by the library.

The CLI maps these onto exit codes: configuration-class errors exit 2,
numeric aborts exit 3.
"""


class ConfigurationError(ValueError):
    """Invalid configuration value (widths, rates, weights, config files)."""


class ShapeError(ValueError):
    """Array arguments whose shapes do not line up."""


class DataError(ValueError):
    """Invalid data content (labels out of range, empty batches/sets)."""


class FormatError(ValueError):
    """Malformed on-disk file (IDX header/payload problems)."""


class NumericError(FloatingPointError):
    """Non-finite value encountered during training."""


class NotFittedError(ValueError, AttributeError):
    """Estimator used before ``fit``; mirrors sklearn's exception bases."""

"""Exception types shared across the toolkit.

The CLI maps these onto process exit codes (config 2, data 3, numeric 4);
library code raises them directly.
"""


class CrossMaxError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(CrossMaxError):
    """Invalid or inconsistent configuration."""


class DataError(CrossMaxError):
    """Malformed input data or file contents."""


class NumericError(CrossMaxError):
    """Numerical failure (non-finite values, degenerate inputs)."""

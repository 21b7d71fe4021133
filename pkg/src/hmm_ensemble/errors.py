"""Exception types shared across the package.

The CLI maps these onto exit codes: config/parameter problems exit 2,
data problems exit 3, numeric failures exit 4.
"""


class ParameterError(ValueError):
    """An argument or configuration value is out of its valid range."""


class ConfigError(ParameterError):
    """A config file could not be parsed; the message names the key."""


class DataError(ValueError):
    """Input data is malformed or inconsistent with the model."""


class NumericError(RuntimeError):
    """A computation produced non-finite or otherwise unusable values."""

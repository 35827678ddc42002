"""Exception hierarchy shared across the library and the CLI exit-code mapping."""


class CpwtError(Exception):
    """Base class for library errors."""


class ConfigError(CpwtError):
    """Invalid configuration file, flag value, or parameter combination."""

    exit_code = 2


class DataError(CpwtError):
    """Missing or malformed input data / pipeline artifacts."""

    exit_code = 3


class NumericError(CpwtError):
    """Non-finite value produced where a finite one is required."""

    exit_code = 4

"""
tandemnet — Error hierarchy

Library code raises these; only the CLI turns them into exit codes.
"""


class TandemError(Exception):
    """Base class for every error raised by tandemnet."""


class ShapeError(TandemError, ValueError):
    """Tensor geometry or dimension mismatch."""


class NumericError(TandemError, ArithmeticError):
    """NaN/Inf where a finite value is required."""


class ParameterError(TandemError, ValueError):
    """Invalid scalar parameter (T == 0, std == 0, unknown mode, ...)."""


class DataError(TandemError, ValueError):
    """Malformed external data: IDX headers, event records, labels."""


class ChecksumError(DataError):
    """Checkpoint CRC32 does not match its payload."""


class VersionError(DataError):
    """Checkpoint magic or version is not one this build can read."""


class StateError(TandemError, RuntimeError):
    """Operation invalid in the object's current lifecycle state."""


class ConfigError(TandemError, ValueError):
    """Run-config file or architecture string is invalid."""


class UndefinedMetricError(TandemError, ValueError):
    """Metric undefined for the given inputs (zero vector, zero variance)."""

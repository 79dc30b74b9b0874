"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: usage/config/input problems exit 2,
experiment failures exit 1.
"""


class TelepeftError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(TelepeftError):
    """Tensor or model extents do not line up."""


class ParameterError(TelepeftError):
    """A numeric hyper-parameter is outside its legal range."""


class UsageError(TelepeftError):
    """An operation was called in a way its contract forbids."""


class InputError(TelepeftError):
    """User-supplied data (prompts, token ids, masks) is invalid."""


class ConfigError(TelepeftError):
    """A configuration file or geometry setting is inconsistent."""


class CorruptionError(TelepeftError):
    """Stored data fails checksum or shape validation."""


class InternalError(TelepeftError):
    """An invariant the code relies on was violated."""


class TrainingDiverged(TelepeftError):
    """Loss became non-finite; carries diagnostics about the batch."""

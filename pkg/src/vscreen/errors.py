"""Exception hierarchy.

The CLI maps :class:`ConfigError` to exit code 2 and :class:`DataError` to
exit code 3; anything else is an internal error (exit 1).
"""


class VScreenError(Exception):
    """Base class for all package errors."""


class ConfigError(VScreenError, ValueError):
    """Bad configuration: unknown scorer, missing spec, bad argument."""


class ArgumentError(ConfigError):
    """An argument is outside its allowed domain."""


class DataError(VScreenError, ValueError):
    """Input data is unreadable or violates an invariant."""


class SchemaError(DataError):
    """A required column is missing from a score table."""


class ParseError(DataError):
    """A cell could not be parsed."""


class ValidationError(DataError):
    """A dataset invariant is violated (duplicate ids, bad labels, ...)."""


class UndefinedMetricError(DataError):
    """The metric is undefined for this input (e.g. no actives)."""


class UnsupportedInputError(DataError):
    """The metric does not accept this kind of ranking (e.g. filtered)."""


class ShapeError(VScreenError, ValueError):
    """Matrix width does not match the fitted model or scaler."""


class TrainingError(VScreenError, RuntimeError):
    """Training diverged."""


class ModelFormatError(ConfigError):
    """A model file has an unknown or mismatched format version."""

"""Exception types shared across the toolkit.

Every error raised on purpose derives from ToolkitError so callers (and the
CLI) can map failures to exit codes without string matching.
"""


class ToolkitError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(ToolkitError):
    """Invalid configuration value or malformed config file."""


class IOFailure(ToolkitError):
    """File could not be read, decoded, or written."""


class ValidationError(ToolkitError):
    """Input data violates a documented precondition or invariant."""


class BoundsError(ValidationError):
    """A window or index falls outside its host's extent."""


class DegenerateInputError(ValidationError):
    """Input is legal in shape but makes the requested statistic undefined
    (e.g. correlation of a constant sequence)."""

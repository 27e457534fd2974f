"""Exception hierarchy shared by every module."""


class DiffuseError(Exception):
    """Base class for all errors raised by the package."""


class InvalidArgumentError(DiffuseError, ValueError):
    pass


class ShapeError(DiffuseError, ValueError):
    """Array or field does not match the grid it is used with."""


class ConfigurationError(DiffuseError, ValueError):
    """A thread count or other runtime setting could not be resolved.

    The message names the source (CLI flag or environment variable) that
    supplied the bad value.
    """


class MapFormatError(DiffuseError):
    """A map file is not a well-formed SDM1/CSV file."""


class MapValidationError(DiffuseError):
    """A map file parsed, but its grid violates a grid invariant."""


class OracleError(DiffuseError):
    """A test oracle refused its input or failed to converge."""

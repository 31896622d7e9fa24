"""Exception types shared across the package."""


class InthtError(Exception):
    """Base class for all package errors."""


class ConfigError(InthtError, ValueError):
    """Invalid parameter or configuration."""


class SizeError(InthtError, ValueError):
    """Operand shapes or bucket counts do not agree."""


class DataError(InthtError, ValueError):
    """Dataset content is inconsistent with the request."""


class OutputError(InthtError, OSError):
    """A result file could not be written or read."""

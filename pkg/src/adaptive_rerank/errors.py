"""Exception hierarchy shared across the package.

Exit-code mapping used by the CLI: ConfigError / InvalidInputError -> 1,
DataError / FormatError -> 2.
"""


class Error(Exception):
    """Base class for all package errors."""


class InvalidInputError(Error):
    """An argument violates a documented precondition."""


class InsufficientPoolError(InvalidInputError):
    """A ranking is too shallow for the requested operation."""


class DataError(Error):
    """Input data is malformed or contains invalid values."""


class FormatError(DataError):
    """A serialized artifact is corrupt. Carries the byte offset when known."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class ConfigError(Error):
    """Inconsistent or unsupported configuration."""

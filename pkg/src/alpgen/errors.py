"""Shared exception types."""


class AlpgenError(Exception):
    """Base class for every error raised by this package."""


class UsageError(AlpgenError):
    """Bad arguments or configuration supplied by the caller."""

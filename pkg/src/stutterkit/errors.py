"""Common exception base so callers (notably the CLI) can map failures to exit codes."""


class StutterKitError(Exception):
    """Base class for all domain errors raised by this package."""


class IoFailure(StutterKitError):
    """Filesystem operation failed (write, rename, missing directory)."""

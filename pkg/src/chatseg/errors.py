"""Shared exception types."""


class ChatsegError(Exception):
    """Base class for all package errors."""


class DimensionMismatchError(ChatsegError, ValueError):
    """Two rasters that must share a shape do not."""


class MaskDecodeError(ChatsegError, ValueError):
    """Bytes could not be decoded into a valid binary mask."""


class BackendError(ChatsegError, RuntimeError):
    """A generation/judge backend failed after its retry budget."""


class PipelineError(ChatsegError, RuntimeError):
    """Dataset pipeline failure, tagged with the offending image."""

    def __init__(self, message: str, image_id: str | None = None):
        super().__init__(message)
        self.image_id = image_id


class ConfigError(ChatsegError, ValueError):
    """Invalid or inconsistent configuration."""

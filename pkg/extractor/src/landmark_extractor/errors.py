class ExtractorError(Exception):
    """Base error for extraction failures (unreadable video, bad config)."""


class BackendUnavailableError(ExtractorError):
    """The requested landmark backend's package is not installed."""

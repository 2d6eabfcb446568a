"""Video-to-landmark-stream extraction for name-calling session recordings."""

from .errors import BackendUnavailableError, ExtractorError

__version__ = "0.1.0"

__all__ = ["ExtractorError", "BackendUnavailableError", "__version__"]

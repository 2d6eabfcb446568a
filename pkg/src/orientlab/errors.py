"""Exception types shared across the package."""


class OrientLabError(Exception):
    """Base class for all package-specific errors."""


class FormatError(OrientLabError, ValueError):
    """Malformed input file. Carries the 1-based line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DomainError(OrientLabError, ValueError):
    """An operation was called with input outside its mathematical domain."""


class ConfigError(OrientLabError, ValueError):
    """Invalid configuration (profiles, index maps, run config)."""

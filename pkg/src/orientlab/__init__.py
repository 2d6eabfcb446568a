"""Batch analytics for name-calling response sessions.

Submodules: ``model`` (stream/manifest formats), ``geometry`` (per-frame eye
metrics), ``trials`` (latency/duration/engagement per trial), ``coding``
(ordinal-code analytics), ``stats`` (non-parametric battery), ``synth``
(synthetic oracle), ``pipeline``/``cli`` (batch reports).
"""

from .errors import ConfigError, DomainError, FormatError, OrientLabError

__version__ = "0.1.0"

__all__ = ["OrientLabError", "FormatError", "DomainError", "ConfigError", "__version__"]

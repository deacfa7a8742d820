"""rumourlab: rumour detection and analysis toolkit.

Thread ingestion, tweet-aware text processing, TF-IDF and handcrafted
features, propagation trees, a built-in reverse-mode gradient engine,
four classifier families, evaluation and experiment running, and the
tweet analysis suite.
"""

__version__ = "0.1.0"

from .errors import ParseError, ValidationError

__all__ = ["ParseError", "ValidationError", "__version__"]

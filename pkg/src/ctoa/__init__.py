"""
Time-of-arrival distributions for a free particle confined to a segment.

The package computes the spectrum of the confined time-of-arrival operator,
the arrival-time distribution it induces for a wave packet, Kijowski's
continuum distribution by two independent routes, and the box dynamics of
the confined eigenfunctions.
"""

from .errors import AccuracyError, BracketError, CTOAError, DomainError, UnsupportedError

__version__ = "0.1.0"

__all__ = [
    "AccuracyError",
    "BracketError",
    "CTOAError",
    "DomainError",
    "UnsupportedError",
    "__version__",
]

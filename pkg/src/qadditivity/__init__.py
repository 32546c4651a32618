"""Numerical tools for maximal output purity, Holevo capacity and their
multiplicativity/additivity on product channels."""

__version__ = "0.1.0"

from .errors import InvalidInput, InvalidParameter, NotAState  # noqa: E402,F401

"""Quasi-exactly-solvable periodic potential pairs from a single generating function."""

from . import errors, expr, jets

__all__ = ["errors", "expr", "jets"]
__version__ = "0.1.0"

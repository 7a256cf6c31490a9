"""Symbolic point-splitting calculus for Dirac fields on curved spacetimes."""

from pointsplit.expr import Expr, Factor, Index, Term, canonicalize
from pointsplit.parse import parse
from pointsplit.printing import to_json, to_latex, to_plain

__all__ = [
    "Expr",
    "Factor",
    "Index",
    "Term",
    "canonicalize",
    "parse",
    "to_json",
    "to_latex",
    "to_plain",
]

__version__ = "0.1.0"

"""The ``.fm`` modeling language: parser and canonical printer."""

from .loader import load_model
from .parser import SourceUnit, parse, parse_atom, parse_expr
from .printer import format_effect, format_expr, print_canonical, print_scenarios

__all__ = [
    "SourceUnit", "load_model", "parse", "parse_atom", "parse_expr", "format_effect", "format_expr",
    "print_canonical", "print_scenarios",
]

"""An executable model of an ownership-typed language: a surface language with
a borrow checker, a lowering to a small core language, and an abstract
machine with a block memory and data-race detection."""

from .checker import check_program
from .core_parser import parse_core
from .lowering import lower_program
from .machine import Machine, run_program
from .search import enumerate_interleavings
from .surface_parser import parse_surface

__all__ = [
    "check_program", "parse_core", "lower_program", "Machine", "run_program",
    "enumerate_interleavings", "parse_surface",
]

"""Safety-preserving trimming of nondeterministic imperative programs."""

from .config import PRESETS, TrimConfig, TrimResult, trim_program
from .interp import ExecConfig, Tag, Valuation, explore, run
from .outcomes import check_equi_safe, outcome_set
from .parser import ParseError, parse
from .printer import print_program

__all__ = [
    "PRESETS",
    "ExecConfig",
    "ParseError",
    "Tag",
    "TrimConfig",
    "TrimResult",
    "Valuation",
    "check_equi_safe",
    "explore",
    "outcome_set",
    "parse",
    "print_program",
    "run",
    "trim_program",
]

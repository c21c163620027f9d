"""pdelin: invertible linearization of nonlinear PDE systems through
conservation-law multipliers, over an exact symbolic jet-space kernel."""

from .expr import (Expr, Fun, Jet, Rat, Sym, add, canonicalize, div, equal,
                   exp_, log_, mul, neg, pow_int, rat, sub, substitute,
                   sym_pow, total_derivative)
from .grammar import parse, to_text
from .probe import numeric_probe, probe_is_zero, probe_nonzero
from .workspace import Workspace

__version__ = "0.1.0"

__all__ = [
    "Expr", "Fun", "Jet", "Rat", "Sym", "Workspace", "add", "canonicalize",
    "div", "equal", "exp_", "log_", "mul", "neg", "numeric_probe", "parse",
    "pow_int", "probe_is_zero", "probe_nonzero", "rat", "sub", "substitute",
    "sym_pow", "to_text", "total_derivative", "__version__",
]

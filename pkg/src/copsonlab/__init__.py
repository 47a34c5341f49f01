"""Numerical laboratory for extended Copson, Leindler and Bennett-Grosse-Erdmann inequalities."""
from .errors import ConvergenceError, DataError, NotSummableError, SpecError
from .kernels import BACKEND
from .sequences import SequenceSpec, Weights, cumulate, materialize, parse_spec, tail_bound, weights_from_spec

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ConvergenceError",
    "DataError",
    "NotSummableError",
    "SequenceSpec",
    "SpecError",
    "Weights",
    "cumulate",
    "materialize",
    "parse_spec",
    "tail_bound",
    "weights_from_spec",
]

"""Differentiation engine: dual numbers for input derivatives on a reverse-mode tape."""
from .dual import Dual, seed_inputs, tanh
from .params import ParamLayout, ParamVector, grad_params
from .tape import NonFiniteError, Tape, UnsupportedPrimitiveError, Var

__all__ = [
    "Dual",
    "NonFiniteError",
    "ParamLayout",
    "ParamVector",
    "Tape",
    "UnsupportedPrimitiveError",
    "Var",
    "grad_params",
    "seed_inputs",
    "tanh",
]

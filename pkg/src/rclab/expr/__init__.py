"""Expression language: parsing, printing, derivatives, and fast evaluation."""

from .ast import (
    FUNCTIONS,
    VELOCITY_SUFFIX,
    BinOp,
    Call,
    Expr,
    Neg,
    Num,
    SymbolTable,
    Var,
    free_names,
    to_source,
    walk,
)
from .backend import get_backend
from .deriv import differentiate, fold_constants, substitute
from .errors import (
    ArityError,
    DomainEvalError,
    ExprError,
    ExprSyntaxError,
    UnknownIdentifierError,
)
from .parser import parse
from .tape import Dual2Value, Tape, compile_tape

__all__ = [
    "FUNCTIONS",
    "VELOCITY_SUFFIX",
    "ArityError",
    "BinOp",
    "Call",
    "DomainEvalError",
    "Dual2Value",
    "Expr",
    "ExprError",
    "ExprSyntaxError",
    "Neg",
    "Num",
    "SymbolTable",
    "Tape",
    "UnknownIdentifierError",
    "Var",
    "compile_tape",
    "differentiate",
    "fold_constants",
    "free_names",
    "get_backend",
    "parse",
    "substitute",
    "to_source",
    "walk",
]

"""Flat evaluation tapes and one-pass second-order forward AD.

An expression tree is compiled once into a postorder tape (parallel arrays
of opcodes and child slots).  Evaluating the tape produces the value, the
gradient, and the Hessian with respect to the active variables (coordinates
then velocities) in a single pass.  Two kernels with identical operation
order exist: a compiled Cython one and a pure-Python fallback; see
``rclab.expr.backend``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backend
from .ast import BinOp, Call, Expr, Neg, Num, SymbolTable, Var
from .errors import DomainEvalError

OP_CONST = 0
OP_VAR = 1
OP_PARAM = 2
OP_NEG = 3
OP_ADD = 4
OP_SUB = 5
OP_MUL = 6
OP_DIV = 7
OP_POWI = 8
OP_SIN = 9
OP_COS = 10
OP_TAN = 11
OP_EXP = 12
OP_LOG = 13
OP_SQRT = 14
OP_LOGP = 15  # log emitted for a non-integer power; differs only in diagnostics

_CALL_OPS = {
    "sin": OP_SIN,
    "cos": OP_COS,
    "tan": OP_TAN,
    "exp": OP_EXP,
    "log": OP_LOG,
    "sqrt": OP_SQRT,
}

# error codes shared with the kernels
_ERRORS = {
    1: "division by zero",
    2: "log of non-positive value",
    3: "sqrt of negative value",
    4: "zero raised to a negative power",
    5: "non-finite intermediate value",
    6: "non-integer power of non-positive base",
}

_MAX_INT_EXPONENT = 512


@dataclass(frozen=True)
class Dual2Value:
    """Value, gradient, and (exactly symmetric) Hessian at one point."""

    value: float
    gradient: np.ndarray
    hessian: np.ndarray


def _const_value(node: Expr):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Neg):
        inner = _const_value(node.arg)
        return None if inner is None else -inner
    return None


class Tape:
    """Compiled form of one expression over a symbol table."""

    def __init__(self, expr: Expr, symbols: SymbolTable):
        self.symbols = symbols
        self.n_active = len(symbols.actives)
        self.n_params = len(symbols.params)
        ops, i1, i2, consts, offs = [], [], [], [], []

        def emit(op, a=-1, b=-1, c=0.0, off=-1):
            ops.append(op)
            i1.append(a)
            i2.append(b)
            consts.append(c)
            offs.append(off)
            return len(ops) - 1

        def build(node: Expr) -> int:
            if isinstance(node, Num):
                return emit(OP_CONST, c=float(node.value), off=node.offset)
            if isinstance(node, Var):
                ai = symbols.active_index(node.name)
                if ai is not None:
                    return emit(OP_VAR, a=ai, off=node.offset)
                pi = symbols.param_index(node.name)
                if pi is None:
                    raise DomainEvalError(f"unbound identifier {node.name!r}", node.offset)
                return emit(OP_PARAM, a=pi, off=node.offset)
            if isinstance(node, Neg):
                return emit(OP_NEG, a=build(node.arg), off=node.offset)
            if isinstance(node, Call):
                return emit(_CALL_OPS[node.func], a=build(node.arg), off=node.offset)
            if isinstance(node, BinOp):
                if node.op == "^":
                    k = _const_value(node.b)
                    if k is not None and float(k).is_integer() and abs(k) <= _MAX_INT_EXPONENT:
                        return emit(OP_POWI, a=build(node.a), b=int(k), off=node.offset)
                    la = emit(OP_LOGP, a=build(node.a), off=node.offset)
                    m = emit(OP_MUL, a=build(node.b), b=la, off=node.offset)
                    return emit(OP_EXP, a=m, off=node.offset)
                opcode = {"+": OP_ADD, "-": OP_SUB, "*": OP_MUL, "/": OP_DIV}[node.op]
                return emit(opcode, a=build(node.a), b=build(node.b), off=node.offset)
            raise TypeError(f"not an expression node: {node!r}")

        build(expr)
        self.ops = np.asarray(ops, dtype=np.int32)
        self.i1 = np.asarray(i1, dtype=np.int32)
        self.i2 = np.asarray(i2, dtype=np.int32)
        self.consts = np.asarray(consts, dtype=np.float64)
        self.offsets = np.asarray(offs, dtype=np.int32)
        self.n_slots = len(ops)

    def eval_raw(self, x, params, mode: int = 2):
        """Evaluate; returns (value, gradient|None, hessian|None)."""
        x = np.ascontiguousarray(x, dtype=np.float64)
        params = np.ascontiguousarray(params, dtype=np.float64)
        if x.shape != (self.n_active,):
            raise ValueError(f"expected {self.n_active} active values, got {x.shape}")
        if params.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameter values, got {params.shape}")
        err, slot, value, grad, hess = backend.evaluate(
            self.ops, self.i1, self.i2, self.consts, x, params, int(mode), self.n_active
        )
        if err:
            raise DomainEvalError(_ERRORS.get(err, "evaluation failed"), int(self.offsets[slot]))
        if mode >= 1 and not np.all(np.isfinite(grad)):
            raise DomainEvalError("non-finite derivative", int(self.offsets[-1]))
        if mode >= 2 and not np.all(np.isfinite(hess)):
            raise DomainEvalError("non-finite second derivative", int(self.offsets[-1]))
        return value, grad, hess

    def eval2(self, x, params=()) -> Dual2Value:
        value, grad, hess = self.eval_raw(x, params, mode=2)
        return Dual2Value(value, grad, hess)

    def value(self, x, params=()) -> float:
        return self.eval_raw(x, params, mode=0)[0]

    def value_grad(self, x, params=()):
        v, g, _ = self.eval_raw(x, params, mode=1)
        return v, g


def compile_tape(expr: Expr, symbols: SymbolTable) -> Tape:
    return Tape(expr, symbols)

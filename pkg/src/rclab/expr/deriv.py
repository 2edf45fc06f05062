"""Structural substitution and differentiation on expression trees.

These power the pushforward construction (composing a system with a point
map needs L composed with the inverse map and its Jacobian).  The smart
constructors only drop exact zero/one factors produced by the chain rule;
no other rewriting is performed, so printed results stay recognizable.
"""

from __future__ import annotations

import math

from .ast import FUNCTIONS, BinOp, Call, Expr, Neg, Num, Var

_ZERO = Num(0.0)
_ONE = Num(1.0)


def _is_const(node: Expr, value: float) -> bool:
    return isinstance(node, Num) and node.value == value


def _neg(a: Expr) -> Expr:
    if _is_const(a, 0.0):
        return _ZERO
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def _add(a: Expr, b: Expr) -> Expr:
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return BinOp("+", a, b)


def _sub(a: Expr, b: Expr) -> Expr:
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return _neg(b)
    return BinOp("-", a, b)


def _mul(a: Expr, b: Expr) -> Expr:
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return _ZERO
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    return BinOp("*", a, b)


def _div(a: Expr, b: Expr) -> Expr:
    if _is_const(b, 1.0):
        return a
    return BinOp("/", a, b)


def _pow(a: Expr, b: Expr) -> Expr:
    if _is_const(b, 1.0):
        return a
    return BinOp("^", a, b)


_FOLD_BINOP = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": lambda a, b: a / b,
    "^": lambda a, b: a ** b,
}

_FOLD_CALL = {name: getattr(math, name) for name in FUNCTIONS}


def fold_constants(node: Expr) -> Expr:
    """Collapse numeric subtrees bottom-up; leaves the rest untouched.

    Subtrees whose evaluation would leave the real domain (division by a
    zero constant, log of a nonpositive constant) are kept symbolic so the
    runtime error surfaces where the value is actually used.  A zero
    numerator folds to zero, mirroring the zero-factor rule of the smart
    constructors (both erase a domain error at isolated points).
    """
    if isinstance(node, (Num, Var)):
        return node
    if isinstance(node, Neg):
        a = fold_constants(node.arg)
        if isinstance(a, Num):
            return Num(-a.value)
        return _neg(a)
    if isinstance(node, Call):
        a = fold_constants(node.arg)
        if isinstance(a, Num):
            try:
                return Num(float(_FOLD_CALL[node.func](a.value)))
            except ValueError:
                pass
        return Call(node.func, a)
    if isinstance(node, BinOp):
        a = fold_constants(node.a)
        b = fold_constants(node.b)
        if node.op == "/" and _is_const(a, 0.0) and not _is_const(b, 0.0):
            return _ZERO
        if isinstance(a, Num) and isinstance(b, Num):
            try:
                value = float(_FOLD_BINOP[node.op](a.value, b.value))
            except (ValueError, ZeroDivisionError, OverflowError):
                value = None
            if value is not None and math.isfinite(value):
                return Num(value)
        ctor = {"+": _add, "-": _sub, "*": _mul, "/": _div, "^": _pow}[node.op]
        return ctor(a, b)
    raise TypeError(f"not an expression node: {node!r}")


def substitute(node: Expr, mapping: dict) -> Expr:
    """Replace variables by expression trees (capture is not a concern:
    the DSL has no binders)."""
    if isinstance(node, Num):
        return node
    if isinstance(node, Var):
        return mapping.get(node.name, node)
    if isinstance(node, Neg):
        return _neg(substitute(node.arg, mapping))
    if isinstance(node, BinOp):
        return BinOp(node.op, substitute(node.a, mapping), substitute(node.b, mapping))
    if isinstance(node, Call):
        return Call(node.func, substitute(node.arg, mapping))
    raise TypeError(f"not an expression node: {node!r}")


_CALL_DERIVATIVE = {
    "sin": lambda a: Call("cos", a),
    "cos": lambda a: _neg(Call("sin", a)),
    "tan": lambda a: _add(_ONE, _pow(Call("tan", a), Num(2.0))),
    "exp": lambda a: Call("exp", a),
    "log": lambda a: _div(_ONE, a),
    "sqrt": lambda a: _div(_ONE, _mul(Num(2.0), Call("sqrt", a))),
}


def differentiate(node: Expr, name: str) -> Expr:
    """Partial derivative with respect to the variable called ``name``."""
    if isinstance(node, Num):
        return _ZERO
    if isinstance(node, Var):
        return _ONE if node.name == name else _ZERO
    if isinstance(node, Neg):
        return _neg(differentiate(node.arg, name))
    if isinstance(node, Call):
        return _mul(_CALL_DERIVATIVE[node.func](node.arg), differentiate(node.arg, name))
    if isinstance(node, BinOp):
        a, b = node.a, node.b
        da, db = differentiate(a, name), differentiate(b, name)
        if node.op == "+":
            return _add(da, db)
        if node.op == "-":
            return _sub(da, db)
        if node.op == "*":
            return _add(_mul(da, b), _mul(a, db))
        if node.op == "/":
            return _div(_sub(_mul(da, b), _mul(a, db)), _pow(b, Num(2.0)))
        if node.op == "^":
            if isinstance(b, Num):
                k = b.value
                return _mul(_mul(b, _pow(a, Num(k - 1.0))), da)
            # a^b = exp(b log a):  d = a^b (db log a + b da / a)
            return _mul(node, _add(_mul(db, Call("log", a)), _div(_mul(b, da), a)))
    raise TypeError(f"not an expression node: {node!r}")

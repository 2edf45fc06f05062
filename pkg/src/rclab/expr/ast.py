"""Expression AST node types, symbol tables, and the source printer.

Nodes compare structurally; source offsets are carried for diagnostics but
ignored by ``==`` so that ``parse(to_source(ast)) == ast`` can hold exactly.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Union

from .errors import ExprSyntaxError

FUNCTIONS = ("sin", "cos", "tan", "exp", "log", "sqrt")
VELOCITY_SUFFIX = "_dot"
RESERVED = set(FUNCTIONS) | {"pi"}

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


@dataclass(frozen=True)
class Num:
    value: float
    offset: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class Var:
    name: str
    offset: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class Neg:
    arg: "Expr"
    offset: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    a: "Expr"
    b: "Expr"
    offset: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"
    offset: int = field(default=-1, compare=False, repr=False)


Expr = Union[Num, Var, Neg, BinOp, Call]

PI = math.pi


def _check_name(name: str, role: str) -> None:
    if not _IDENT_RE.match(name):
        raise ExprSyntaxError(f"invalid {role} name {name!r}")
    if name in RESERVED:
        raise ExprSyntaxError(f"{role} name {name!r} collides with a reserved word")
    if name.endswith(VELOCITY_SUFFIX):
        raise ExprSyntaxError(
            f"{role} name {name!r} ends with {VELOCITY_SUFFIX!r}, "
            "which is reserved for generated velocity names"
        )


@dataclass(frozen=True)
class SymbolTable:
    """Declared names visible to an expression.

    Velocity names are generated, never declared: coordinate ``q`` always has
    velocity ``q_dot``.  The active-variable order used by differential
    evaluation is coordinates first, then velocities, in declaration order.
    """

    coords: tuple[str, ...]
    params: tuple[str, ...] = ()

    def __post_init__(self):
        coords = tuple(self.coords)
        params = tuple(self.params)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "params", params)
        for c in coords:
            _check_name(c, "coordinate")
        for p in params:
            _check_name(p, "parameter")
        seen = set()
        for name in coords + self.velocities + params:
            if name in seen:
                raise ExprSyntaxError(f"duplicate name {name!r} in symbol table")
            seen.add(name)

    @property
    def velocities(self) -> tuple[str, ...]:
        return tuple(c + VELOCITY_SUFFIX for c in self.coords)

    @property
    def actives(self) -> tuple[str, ...]:
        """Names the differential evaluator treats as variables."""
        return self.coords + self.velocities

    def active_index(self, name: str):
        try:
            return self.actives.index(name)
        except ValueError:
            return None

    def param_index(self, name: str):
        try:
            return self.params.index(name)
        except ValueError:
            return None

    def knows(self, name: str) -> bool:
        return name == "pi" or self.active_index(name) is not None or self.param_index(name) is not None

    def restricted_to_coords(self) -> "SymbolTable":
        """Table for expressions of positions only (point maps)."""
        return SymbolTable(coords=self.coords, params=self.params)


_PREC_ADD = 1
_PREC_MUL = 2
_PREC_NEG = 3
_PREC_POW = 4
_PREC_ATOM = 5


def _prec(node: Expr) -> int:
    if isinstance(node, BinOp):
        if node.op in "+-":
            return _PREC_ADD
        if node.op in "*/":
            return _PREC_MUL
        return _PREC_POW
    if isinstance(node, Neg):
        return _PREC_NEG
    return _PREC_ATOM


def _fmt_number(value: float) -> str:
    if value != value or value in (float("inf"), float("-inf")):
        raise ExprSyntaxError("cannot print a non-finite numeric literal")
    if float(value).is_integer() and abs(value) < 1e16:
        return str(int(value))
    return repr(float(value))


def to_source(node: Expr) -> str:
    """Print a parseable source string; parse(to_source(e)) == e structurally."""

    def go(n: Expr, ctx: int) -> str:
        p = _prec(n)
        if isinstance(n, Num):
            s = _fmt_number(n.value)
        elif isinstance(n, Var):
            s = n.name
        elif isinstance(n, Call):
            s = f"{n.func}({go(n.arg, _PREC_ADD)})"
        elif isinstance(n, Neg):
            s = "-" + go(n.arg, _PREC_NEG)
        elif isinstance(n, BinOp):
            if n.op in "+-":
                s = f"{go(n.a, _PREC_ADD)} {n.op} {go(n.b, _PREC_MUL)}"
            elif n.op in "*/":
                s = f"{go(n.a, _PREC_MUL)}{n.op}{go(n.b, _PREC_NEG)}"
            else:  # ^ binds tighter than unary minus; base must be atomic
                s = f"{go(n.a, _PREC_ATOM)}^{go(n.b, _PREC_NEG)}"
        else:
            raise TypeError(f"not an expression node: {n!r}")
        if p < ctx:
            return f"({s})"
        return s

    return go(node, _PREC_ADD)


def walk(node: Expr):
    """Yield every node of the tree, children before parents."""
    if isinstance(node, Neg):
        yield from walk(node.arg)
    elif isinstance(node, BinOp):
        yield from walk(node.a)
        yield from walk(node.b)
    elif isinstance(node, Call):
        yield from walk(node.arg)
    yield node


def free_names(node: Expr) -> set:
    return {n.name for n in walk(node) if isinstance(n, Var)}

"""Recursive-descent parser for the expression DSL.

Grammar (documented in the README):

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?
    atom   := NUMBER | 'pi' | IDENT | FUNC '(' expr ')' | '(' expr ')'

'^' is right-associative and binds tighter than unary minus, so -x^2 is
-(x^2) and 2^-3 is legal.  Identifiers must be declared in the symbol
table; velocities are the generated '<coord>_dot' names.
"""

from __future__ import annotations

import math
import re

from .ast import FUNCTIONS, BinOp, Call, Expr, Neg, Num, SymbolTable, Var
from .errors import ArityError, ExprSyntaxError, UnknownIdentifierError

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(source: str):
    tokens = []
    pos = 0
    n = len(source)
    while pos < n:
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            stripped = source[pos:].lstrip()
            if not stripped:
                break
            bad_at = pos + (len(source[pos:]) - len(stripped))
            raise ExprSyntaxError(f"unexpected character {source[bad_at]!r}", bad_at)
        kind = m.lastgroup
        text = m.group(kind)
        tokens.append((kind, text, m.start(kind)))
        pos = m.end()
    tokens.append(("eof", "", n))
    return tokens


class _Parser:
    def __init__(self, source: str, symbols: SymbolTable):
        self.source = source
        self.symbols = symbols
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op: str):
        kind, text, off = self.peek()
        if kind == "op" and text == op:
            return self.advance()
        if kind == "eof":
            raise ExprSyntaxError("unexpected end of input", off)
        raise ExprSyntaxError(f"expected {op!r}, found {text!r}", off)

    def parse(self) -> Expr:
        node = self.expr()
        kind, text, off = self.peek()
        if kind != "eof":
            raise ExprSyntaxError(f"unexpected trailing input {text!r}", off)
        return node

    def expr(self) -> Expr:
        node = self.term()
        while True:
            kind, text, off = self.peek()
            if kind == "op" and text in "+-":
                self.advance()
                node = BinOp(text, node, self.term(), offset=off)
            else:
                return node

    def term(self) -> Expr:
        node = self.unary()
        while True:
            kind, text, off = self.peek()
            if kind == "op" and text in "*/":
                self.advance()
                node = BinOp(text, node, self.unary(), offset=off)
            else:
                return node

    def unary(self) -> Expr:
        kind, text, off = self.peek()
        if kind == "op" and text == "-":
            self.advance()
            return Neg(self.unary(), offset=off)
        return self.power()

    def power(self) -> Expr:
        node = self.atom()
        kind, text, off = self.peek()
        if kind == "op" and text == "^":
            self.advance()
            node = BinOp("^", node, self.unary(), offset=off)
        return node

    def atom(self) -> Expr:
        kind, text, off = self.advance()
        if kind == "num":
            return Num(float(text), offset=off)
        if kind == "ident":
            if text == "pi":
                return Num(math.pi, offset=off)
            nkind, ntext, noff = self.peek()
            if nkind == "op" and ntext == "(":
                if text not in FUNCTIONS:
                    raise UnknownIdentifierError(f"unknown function {text!r}", off)
                self.advance()
                arg = self.expr()
                ckind, ctext, coff = self.peek()
                if ckind == "eof":
                    raise ExprSyntaxError("unexpected end of input", coff)
                if ctext == ",":
                    raise ArityError(f"function {text!r} takes exactly one argument", coff)
                if ctext != ")":
                    raise ExprSyntaxError(f"expected ')', found {ctext!r}", coff)
                self.advance()
                return Call(text, arg, offset=off)
            if not self.symbols.knows(text):
                raise UnknownIdentifierError(f"unknown identifier {text!r}", off)
            return Var(text, offset=off)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        if kind == "eof":
            raise ExprSyntaxError("unexpected end of input", off)
        raise ExprSyntaxError(f"unexpected token {text!r}", off)


def parse(source: str, symbols: SymbolTable) -> Expr:
    """Parse source against the symbol table; errors carry byte offsets."""
    return _Parser(source, symbols).parse()

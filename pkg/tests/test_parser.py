"""Parser, printer, and symbol-table tests for the expression language."""

import math

import numpy as np
import pytest

from rclab.expr import (
    FUNCTIONS,
    ArityError,
    BinOp,
    Call,
    ExprSyntaxError,
    Neg,
    Num,
    SymbolTable,
    UnknownIdentifierError,
    Var,
    free_names,
    parse,
    to_source,
)

ST = SymbolTable(coords=("q", "r"), params=("m", "k"))


def test_velocity_names_generated():
    """Each coordinate contributes a matching _dot velocity, in order."""
    assert ST.velocities == ("q_dot", "r_dot")
    assert ST.actives == ("q", "r", "q_dot", "r_dot")


def test_number_forms():
    """Integer, decimal, leading-dot, and exponent literals all parse."""
    for src, val in [("3", 3.0), ("2.5", 2.5), (".5", 0.5), ("1e-3", 1e-3),
                     ("2.5e+2", 250.0), ("7.", 7.0)]:
        node = parse(src, ST)
        assert node == Num(val)


def test_pi_is_folded_to_a_constant():
    assert parse("pi", ST) == Num(math.pi)
    assert parse("2*pi", ST) == BinOp("*", Num(2.0), Num(math.pi))


def test_additive_and_multiplicative_precedence():
    assert parse("1 + 2*3", ST) == BinOp("+", Num(1.0), BinOp("*", Num(2.0), Num(3.0)))
    assert parse("1 - 2 - 3", ST) == BinOp("-", BinOp("-", Num(1.0), Num(2.0)), Num(3.0))
    assert parse("6/2/3", ST) == BinOp("/", BinOp("/", Num(6.0), Num(2.0)), Num(3.0))


def test_power_binds_tighter_than_unary_minus():
    """-x^2 means -(x^2), and powers chain to the right."""
    assert parse("-q^2", ST) == Neg(BinOp("^", Var("q"), Num(2.0)))
    assert parse("2^3^2", ST) == BinOp("^", Num(2.0), BinOp("^", Num(3.0), Num(2.0)))
    assert parse("2^-3", ST) == BinOp("^", Num(2.0), Neg(Num(3.0)))


def test_unary_minus_distributes_over_products():
    assert parse("-2*q", ST) == BinOp("*", Neg(Num(2.0)), Var("q"))
    assert parse("--q", ST) == Neg(Neg(Var("q")))


def test_function_calls():
    assert parse("sin(q)", ST) == Call("sin", Var("q"))
    assert parse("sqrt(q^2 + r^2)", ST) == Call(
        "sqrt", BinOp("+", BinOp("^", Var("q"), Num(2.0)), BinOp("^", Var("r"), Num(2.0)))
    )


def test_parentheses_override_precedence():
    assert parse("(1 + 2)*3", ST) == BinOp("*", BinOp("+", Num(1.0), Num(2.0)), Num(3.0))


def test_unknown_identifier_reports_offset():
    with pytest.raises(UnknownIdentifierError) as exc:
        parse("q + veloci", ST)
    assert exc.value.offset == 4
    assert "at offset 4" in str(exc.value)


def test_unknown_function_reports_offset():
    with pytest.raises(UnknownIdentifierError) as exc:
        parse("q + sinh(q)", ST)
    assert exc.value.offset == 4


def test_two_argument_call_is_an_arity_error():
    with pytest.raises(ArityError) as exc:
        parse("sin(q, r)", ST)
    assert "exactly one argument" in str(exc.value)


def test_trailing_input_rejected():
    with pytest.raises(ExprSyntaxError):
        parse("1 + 2 3", ST)


def test_unexpected_end_of_input():
    with pytest.raises(ExprSyntaxError) as exc:
        parse("q + ", ST)
    assert "end of input" in str(exc.value)


def test_stray_character_rejected_with_offset():
    with pytest.raises(ExprSyntaxError) as exc:
        parse("q + $", ST)
    assert exc.value.offset == 4


def test_missing_close_paren():
    with pytest.raises(ExprSyntaxError):
        parse("sin(q", ST)
    with pytest.raises(ExprSyntaxError):
        parse("(q + r", ST)


def test_reserved_words_rejected_as_symbol_names():
    with pytest.raises(ExprSyntaxError):
        SymbolTable(coords=("sin",), params=())
    with pytest.raises(ExprSyntaxError):
        SymbolTable(coords=("q",), params=("pi",))
    with pytest.raises(ExprSyntaxError):
        SymbolTable(coords=("x_dot",), params=())
    with pytest.raises(ExprSyntaxError):
        SymbolTable(coords=("q", "q"), params=())


def test_free_names():
    node = parse("m*q_dot^2 - k*sin(q)", ST)
    assert free_names(node) == {"m", "q_dot", "k", "q"}


def test_printer_spot_checks():
    """Printed source uses minimal parentheses."""
    cases = [
        ("0.5*m*q_dot^2 - 0.5*k*q^2", "0.5*m*q_dot^2 - 0.5*k*q^2"),
        ("(q + r)*2", "(q + r)*2"),
        ("-(q^2)", "-q^2"),
        ("(-q)^2", "(-q)^2"),
        ("q - (r - 1)", "q - (r - 1)"),
        ("q/(r*m)", "q/(r*m)"),
        ("(2^3)^2", "(2^3)^2"),
        ("sin(q)^2", "sin(q)^2"),
    ]
    for src, expected in cases:
        assert to_source(parse(src, ST)) == expected


def _random_expr(rng, depth):
    """Random AST over ST with nonnegative numeric leaves."""
    if depth == 0 or rng.integers(0, 6) == 0:
        kind = rng.integers(0, 3)
        if kind == 0:
            return Num(float(rng.integers(0, 10)))
        if kind == 1:
            return Num(round(float(rng.uniform(0.01, 99.0)), 4))
        names = ST.actives + ST.params
        return Var(names[rng.integers(0, len(names))])
    c = rng.integers(0, 7)
    if c < 4:
        op = "+-*/"[c]
        return BinOp(op, _random_expr(rng, depth - 1), _random_expr(rng, depth - 1))
    if c == 4:
        return Neg(_random_expr(rng, depth - 1))
    if c == 5:
        return BinOp("^", _random_expr(rng, depth - 1), Num(float(rng.integers(0, 5))))
    f = FUNCTIONS[rng.integers(0, len(FUNCTIONS))]
    return Call(f, _random_expr(rng, depth - 1))


def test_print_parse_roundtrip_fuzz():
    """parse(to_source(e)) reproduces e exactly for 500 random trees."""
    rng = np.random.default_rng(20260822)
    for _ in range(500):
        tree = _random_expr(rng, depth=int(rng.integers(1, 6)))
        assert parse(to_source(tree), ST) == tree

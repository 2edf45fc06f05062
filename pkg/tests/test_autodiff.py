"""Tape autodiff tests: oracle values, finite-difference checks, backends."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from rclab.expr import (
    DomainEvalError,
    SymbolTable,
    compile_tape,
    get_backend,
    parse,
)
from rclab.expr import _tape_py
from rclab.expr.findiff import fd_gradient, fd_hessian

try:
    from rclab.expr import _tape_cy

    HAVE_COMPILED = True
except ImportError:
    HAVE_COMPILED = False

ST = SymbolTable(coords=("q", "r"), params=("m", "k"))


def _tape(src, symbols=ST):
    return compile_tape(parse(src, symbols), symbols)


def test_constant_and_variable_values():
    t = _tape("3.5")
    d = t.eval2(np.zeros(4), np.zeros(2))
    assert d.value == 3.5
    assert np.all(d.gradient == 0.0) and np.all(d.hessian == 0.0)

    t = _tape("r_dot")
    d = t.eval2(np.array([1.0, 2.0, 3.0, 4.0]), np.zeros(2))
    assert d.value == 4.0
    assert_allclose(d.gradient, [0.0, 0.0, 0.0, 1.0])

    t = _tape("k")
    d = t.eval2(np.zeros(4), np.array([2.0, 7.0]))
    assert d.value == 7.0
    assert np.all(d.gradient == 0.0)


def test_harmonic_oscillator_hand_values():
    """L = m qdot^2/2 - k q^2/2 at q=1.5, qdot=2, m=2, k=3."""
    st = SymbolTable(coords=("q",), params=("m", "k"))
    t = compile_tape(parse("0.5*m*q_dot^2 - 0.5*k*q^2", st), st)
    d = t.eval2(np.array([1.5, 2.0]), np.array([2.0, 3.0]))
    assert_allclose(d.value, 0.625, rtol=0, atol=0)
    assert_allclose(d.gradient, [-4.5, 4.0], rtol=0, atol=0)
    assert_allclose(d.hessian, [[-3.0, 0.0], [0.0, 2.0]], rtol=0, atol=0)


def test_function_derivative_table():
    """First and second derivatives of each builtin at a generic point."""
    st = SymbolTable(coords=("x",), params=())
    a = 0.8
    expected = {
        "sin(x)": (math.sin(a), math.cos(a), -math.sin(a)),
        "cos(x)": (math.cos(a), -math.sin(a), -math.cos(a)),
        "tan(x)": (math.tan(a), 1.0 + math.tan(a) ** 2,
                   2.0 * math.tan(a) * (1.0 + math.tan(a) ** 2)),
        "exp(x)": (math.exp(a), math.exp(a), math.exp(a)),
        "log(x)": (math.log(a), 1.0 / a, -1.0 / a**2),
        "sqrt(x)": (math.sqrt(a), 0.5 / math.sqrt(a), -0.25 * a**-1.5),
    }
    for src, (v, g, h) in expected.items():
        d = compile_tape(parse(src, st), st).eval2(np.array([a, 0.0]))
        assert_allclose(d.value, v, rtol=1e-15)
        assert_allclose(d.gradient[0], g, rtol=1e-15)
        assert_allclose(d.hessian[0, 0], h, rtol=1e-14)


def test_integer_power_negative_base():
    """(-2)^3 = -8 with derivative 3*4 = 12 and second derivative -12."""
    st = SymbolTable(coords=("x",), params=())
    d = compile_tape(parse("x^3", st), st).eval2(np.array([-2.0, 0.0]))
    assert d.value == -8.0
    assert d.gradient[0] == 12.0
    assert d.hessian[0, 0] == -12.0


def test_zero_power_conventions():
    st = SymbolTable(coords=("x",), params=())
    t = compile_tape(parse("x^0", st), st)
    assert t.value(np.array([0.0, 0.0])) == 1.0
    assert t.value(np.array([3.0, 0.0])) == 1.0
    d = t.eval2(np.array([2.0, 0.0]))
    assert d.gradient[0] == 0.0 and d.hessian[0, 0] == 0.0


def test_negative_integer_power():
    st = SymbolTable(coords=("x",), params=())
    d = compile_tape(parse("x^-2", st), st).eval2(np.array([2.0, 0.0]))
    assert_allclose(d.value, 0.25, rtol=1e-15)
    assert_allclose(d.gradient[0], -2.0 * 2.0**-3, rtol=1e-15)
    assert_allclose(d.hessian[0, 0], 6.0 * 2.0**-4, rtol=1e-15)


def test_general_power_matches_pow():
    st = SymbolTable(coords=("x",), params=())
    t = compile_tape(parse("x^2.5", st), st)
    d = t.eval2(np.array([1.7, 0.0]))
    assert_allclose(d.value, 1.7**2.5, rtol=1e-15)
    assert_allclose(d.gradient[0], 2.5 * 1.7**1.5, rtol=1e-13)
    assert_allclose(d.hessian[0, 0], 2.5 * 1.5 * 1.7**0.5, rtol=1e-12)


FUZZ_SOURCES = [
    "0.5*m*(q_dot^2 + r_dot^2) - k*(1 - cos(q)) + q*r",
    "sin(q*r_dot) + exp(-q^2)/sqrt(r + 2)",
    "m*log(r + 1.5)*tan(q/4) - r^3/6",
    "(q + r*q_dot)^4 - k/(1 + q^2)",
    "exp(q - r)*cos(m*r_dot) + sqrt(q + 2)*r",
    "q^(r/5 + 1) + r_dot*q_dot*q",
]


def test_gradient_and_hessian_match_finite_differences():
    """AD derivatives agree with central differences over random points."""
    rng = np.random.default_rng(7)
    for src in FUZZ_SOURCES:
        t = _tape(src)
        f = None
        for _ in range(10):
            x = rng.uniform(0.3, 1.4, size=4)
            p = rng.uniform(0.5, 2.0, size=2)
            d = t.eval2(x, p)
            f = lambda xx: t.value(xx, p)
            assert_allclose(d.gradient, fd_gradient(f, x), rtol=2e-6, atol=2e-7)
            assert_allclose(d.hessian, fd_hessian(f, x), rtol=2e-4, atol=2e-5)


def test_hessian_exactly_symmetric():
    """Hessians are symmetric bit for bit, not just within tolerance."""
    rng = np.random.default_rng(11)
    for src in FUZZ_SOURCES:
        t = _tape(src)
        for _ in range(10):
            d = t.eval2(rng.uniform(0.3, 1.4, size=4), rng.uniform(0.5, 2.0, size=2))
            assert np.array_equal(d.hessian, d.hessian.T)


def test_evaluation_is_deterministic():
    """Repeated evaluation returns bit identical floats."""
    t = _tape(FUZZ_SOURCES[0])
    x = np.array([0.9, 1.1, 0.4, 0.7])
    p = np.array([1.3, 0.8])
    d1 = t.eval2(x, p)
    d2 = t.eval2(x, p)
    assert d1.value == d2.value
    assert np.array_equal(d1.gradient, d2.gradient)
    assert np.array_equal(d1.hessian, d2.hessian)


@pytest.mark.skipif(not HAVE_COMPILED, reason="compiled kernel not built")
def test_backends_bit_identical():
    """Compiled and pure kernels agree exactly on value, grad, and Hessian."""
    rng = np.random.default_rng(13)
    for src in FUZZ_SOURCES:
        t = _tape(src)
        for _ in range(10):
            x = rng.uniform(0.3, 1.4, size=4)
            p = rng.uniform(0.5, 2.0, size=2)
            rc = _tape_cy.evaluate(t.ops, t.i1, t.i2, t.consts, x, p, 2, 4)
            rp = _tape_py.evaluate(t.ops, t.i1, t.i2, t.consts, x, p, 2, 4)
            assert rc[0] == rp[0] == 0
            assert rc[2] == rp[2]
            assert np.array_equal(rc[3], rp[3])
            assert np.array_equal(rc[4], rp[4])


def test_value_modes_agree():
    t = _tape(FUZZ_SOURCES[1])
    x = np.array([0.9, 1.1, 0.4, 0.7])
    p = np.array([1.3, 0.8])
    d = t.eval2(x, p)
    assert t.value(x, p) == d.value
    v, g = t.value_grad(x, p)
    assert v == d.value and np.array_equal(g, d.gradient)


def test_division_by_zero_reports_operator_offset():
    t = _tape("1/q")
    with pytest.raises(DomainEvalError) as exc:
        t.value(np.array([0.0, 0.0, 0.0, 0.0]), np.zeros(2))
    assert "division by zero" in str(exc.value)
    assert exc.value.offset == 1


def test_log_domain_error():
    t = _tape("log(q)")
    with pytest.raises(DomainEvalError) as exc:
        t.value(np.array([-1.0, 0.0, 0.0, 0.0]), np.zeros(2))
    assert "log of non-positive value" in str(exc.value)
    assert exc.value.offset == 0


def test_sqrt_domain_error():
    t = _tape("2 + sqrt(q)")
    with pytest.raises(DomainEvalError) as exc:
        t.value(np.array([-0.5, 0.0, 0.0, 0.0]), np.zeros(2))
    assert "sqrt of negative value" in str(exc.value)
    assert exc.value.offset == 4


def test_zero_to_negative_integer_power():
    t = _tape("q^-1")
    with pytest.raises(DomainEvalError) as exc:
        t.value(np.zeros(4), np.zeros(2))
    assert "zero raised to a negative power" in str(exc.value)


def test_general_power_needs_positive_base():
    t = _tape("q^0.5")
    with pytest.raises(DomainEvalError) as exc:
        t.value(np.array([-2.0, 0.0, 0.0, 0.0]), np.zeros(2))
    assert "non-integer power of non-positive base" in str(exc.value)
    assert exc.value.offset == 1


def test_overflow_reported_as_non_finite():
    t = _tape("exp(q)")
    with pytest.raises(DomainEvalError) as exc:
        t.value(np.array([1e4, 0.0, 0.0, 0.0]), np.zeros(2))
    assert "non-finite" in str(exc.value)


def test_sqrt_derivative_at_zero_rejected():
    """The value sqrt(0) is fine but its derivative is not."""
    t = _tape("sqrt(q)")
    x = np.zeros(4)
    assert t.value(x, np.zeros(2)) == 0.0
    with pytest.raises(DomainEvalError):
        t.eval2(x, np.zeros(2))


def test_active_layout_is_coords_then_velocities():
    """Gradient slots follow (q, r, q_dot, r_dot) ordering."""
    t = _tape("q + 2*r + 3*q_dot + 4*r_dot")
    d = t.eval2(np.zeros(4), np.zeros(2))
    assert_allclose(d.gradient, [1.0, 2.0, 3.0, 4.0], rtol=0, atol=0)


def test_backend_name_reported():
    assert get_backend() in ("compiled", "python")

"""Chart, bundle point, two-form, and lifted-map tests."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from rclab.geometry import (
    ConfigSpace,
    CotangentPoint,
    DoubleTangentVector,
    PointMap,
    TangentPoint,
    TwoFormAtPoint,
    canonical_form,
    double_tangent_lift,
    pullback_form,
    tangent_lift,
)

LINE = ConfigSpace(["q"], q_box=(-2.0, 2.0), v_box=(-2.0, 2.0))
PLANE = ConfigSpace(["x", "y"], q_box=(-2.0, 2.0), v_box=(-2.0, 2.0))


def test_canonical_form_basis_pairings():
    """In (dq, dp) the canonical form pairs dq^i with p_i and nothing else."""
    pt = CotangentPoint([0.0], [0.0])
    w = canonical_form(pt)
    assert w([1.0, 0.0], [0.0, 1.0]) == 1.0
    assert w([1.0, 0.0], [1.0, 0.0]) == 0.0

    pt2 = CotangentPoint([0.0, 0.0], [0.0, 0.0])
    w2 = canonical_form(pt2)
    assert w2([1, 0, 0, 0], [0, 1, 0, 0]) == 0.0
    assert w2([1, 0, 0, 0], [0, 0, 1, 0]) == 1.0
    assert w2([0, 1, 0, 0], [0, 0, 0, 1]) == 1.0


def test_two_form_rejects_symmetric_matrix():
    with pytest.raises(ValueError):
        TwoFormAtPoint(None, np.eye(2))


def test_two_form_rejects_degenerate_symplectic():
    m = np.zeros((4, 4))
    m[0, 2] = 1.0
    m[2, 0] = -1.0
    TwoFormAtPoint(None, m)  # fine as a plain form
    with pytest.raises(ValueError):
        TwoFormAtPoint(None, m, symplectic=True)


def test_pullback_identity_and_scaling():
    pt = CotangentPoint([0.0], [0.0])
    w = canonical_form(pt)
    same = pullback_form(np.eye(2), w)
    assert_allclose(same.matrix, w.matrix, rtol=0, atol=0)
    scaled = pullback_form(2.0 * np.eye(2), w)
    assert_allclose(scaled.matrix, 4.0 * w.matrix, rtol=0, atol=0)


def test_pullback_by_mass_matrix_jacobian():
    """For p = m qdot the fiber Jacobian [[1,0],[0,m]] turns dq^dp into m dq^dqdot."""
    m = 2.5
    J = np.diag([1.0, m])
    w0 = canonical_form(CotangentPoint([0.0], [0.0]))
    wl = pullback_form(J, w0)
    assert_allclose(wl.matrix, [[0.0, m], [-m, 0.0]], rtol=0, atol=0)


def test_pullback_antisymmetry_is_exact():
    rng = np.random.default_rng(3)
    for _ in range(20):
        a = rng.normal(size=(4, 4))
        omega = TwoFormAtPoint(None, a - a.T)
        J = rng.normal(size=(4, 4))
        out = pullback_form(J, omega)
        assert np.array_equal(out.matrix, -out.matrix.T)


def test_pullback_roundtrip_inverse_jacobian():
    rng = np.random.default_rng(5)
    w0 = canonical_form(CotangentPoint(np.zeros(2), np.zeros(2)))
    for _ in range(20):
        J = rng.normal(size=(4, 4)) + 4.0 * np.eye(4)
        back = pullback_form(np.linalg.inv(J), pullback_form(J, w0))
        assert_allclose(back.matrix, w0.matrix, atol=1e-10)


def test_tangent_lift_linear_and_identity():
    d = PointMap(LINE, LINE, ["2*q"], inverse_exprs=["q/2"])
    out = tangent_lift(d, TangentPoint([1.0], [3.0]))
    assert_allclose(out.q, [2.0], rtol=0, atol=0)
    assert_allclose(out.qdot, [6.0], rtol=0, atol=0)

    ident = PointMap(LINE, LINE, ["q"])
    v = TangentPoint([0.7], [-1.2])
    out = tangent_lift(ident, v)
    assert_allclose(out.q, v.q, rtol=0, atol=0)
    assert_allclose(out.qdot, v.qdot, rtol=0, atol=0)


def test_tangent_lift_cubic_shift():
    """phi(q) = q + q^3 has Dphi = 1 + 3 q^2, so (1,1) lifts to (2,4)."""
    f = PointMap(LINE, LINE, ["q + q^3"])
    out = tangent_lift(f, TangentPoint([1.0], [1.0]))
    assert_allclose(out.q, [2.0], rtol=0, atol=0)
    assert_allclose(out.qdot, [4.0], rtol=0, atol=0)


def test_double_tangent_lift_linear_and_identity():
    d = PointMap(LINE, LINE, ["2*q"])
    w = DoubleTangentVector(TangentPoint([1.0], [1.0]), [1.0], [1.0])
    out = double_tangent_lift(d, w)
    assert_allclose(out.base.q, [2.0], rtol=0, atol=0)
    assert_allclose(out.base.qdot, [2.0], rtol=0, atol=0)
    assert_allclose(out.dq, [2.0], rtol=0, atol=0)
    assert_allclose(out.dqdot, [2.0], rtol=0, atol=0)

    ident = PointMap(LINE, LINE, ["q"])
    out = double_tangent_lift(ident, w)
    assert_allclose(out.dq, w.dq, rtol=0, atol=0)
    assert_allclose(out.dqdot, w.dqdot, rtol=0, atol=0)


def test_double_tangent_lift_square_map():
    """T(phi)(q,qdot) = (q^2, 2 q qdot); its Jacobian at (1,1) is [[2,0],[2,2]]."""
    f = PointMap(LINE, LINE, ["q^2"], check_inverse=False)
    w = DoubleTangentVector(TangentPoint([1.0], [1.0]), [1.0], [0.0])
    out = double_tangent_lift(f, w)
    assert_allclose(out.base.q, [1.0], rtol=0, atol=0)
    assert_allclose(out.base.qdot, [2.0], rtol=0, atol=0)
    assert_allclose(out.dq, [2.0], rtol=0, atol=0)
    assert_allclose(out.dqdot, [2.0], rtol=0, atol=0)


def _compose_sources():
    """phi(q) = 2q followed by psi(y) = y + y^3, composed symbolically."""
    phi = PointMap(LINE, LINE, ["2*q"])
    psi = PointMap(LINE, LINE, ["q + q^3"])
    comp = PointMap(LINE, LINE, ["2*q + 8*q^3"])
    return phi, psi, comp


def test_tangent_lift_functorial():
    phi, psi, comp = _compose_sources()
    rng = np.random.default_rng(17)
    for _ in range(50):
        v = LINE.sample(rng)
        via = tangent_lift(psi, tangent_lift(phi, v))
        direct = tangent_lift(comp, v)
        assert_allclose(via.q, direct.q, atol=1e-10)
        assert_allclose(via.qdot, direct.qdot, atol=1e-10)


def test_double_tangent_lift_functorial():
    phi, psi, comp = _compose_sources()
    rng = np.random.default_rng(19)
    for _ in range(50):
        v = LINE.sample(rng)
        w = DoubleTangentVector(v, rng.normal(size=1), rng.normal(size=1))
        via = double_tangent_lift(psi, double_tangent_lift(phi, w))
        direct = double_tangent_lift(comp, w)
        assert_allclose(via.dq, direct.dq, atol=1e-10)
        assert_allclose(via.dqdot, direct.dqdot, atol=1e-10)


def test_point_map_rejects_velocity_expressions():
    with pytest.raises(ValueError):
        PointMap(LINE, LINE, ["q + q_dot"])


def test_point_map_rejects_wrong_inverse():
    with pytest.raises(ValueError):
        PointMap(LINE, LINE, ["2*q"], inverse_exprs=["q/3"])


def test_point_map_component_count():
    with pytest.raises(ValueError):
        PointMap(LINE, PLANE, ["q"])


def test_periodic_wrap_and_delta():
    space = ConfigSpace(["r", "th"], q_box=[(0.5, 2.0), (0.0, 2 * np.pi)],
                        v_box=(-1.0, 1.0), periodic=[False, True])
    q = space.wrap([1.0, 2 * np.pi + 0.3])
    assert_allclose(q, [1.0, 0.3], atol=1e-15)
    d = space.coord_delta([1.0, 0.1], [1.0, 2 * np.pi - 0.1])
    assert_allclose(d, [0.0, 0.2], atol=1e-12)


def test_sampling_stays_in_box():
    space = ConfigSpace(["x", "y"], q_box=[(0.5, 2.0), (-1.0, 1.0)], v_box=(-3.0, 3.0))
    rng = np.random.default_rng(23)
    for _ in range(100):
        v = space.sample(rng)
        assert np.all(v.q >= space.q_box[:, 0]) and np.all(v.q <= space.q_box[:, 1])
        assert np.all(v.qdot >= space.v_box[:, 0]) and np.all(v.qdot <= space.v_box[:, 1])


def test_tangent_point_rejects_non_finite():
    with pytest.raises(ValueError):
        TangentPoint([np.nan], [0.0])

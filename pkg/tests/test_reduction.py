"""Cyclic reduction: sections, reduced geometry, Routhians, and the harness."""

import warnings

import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import (
    TWO_PI,
    make_central_force,
    make_free_particle,
    make_ho,
    make_pendulum_cart,
)
from rclab.control import (
    ControlLaw,
    ControlSubset,
    FiberMap,
    RCLSystem,
    pushforward_lagrangian,
    pushforward_rcl,
)
from rclab.dynamics import euler_lagrange_field, integrate
from rclab.geometry import ConfigSpace, PointMap, TangentPoint
from rclab.lagrangian import LagrangianSystem
from rclab.symmetry import LieAlgebra, TranslationSymmetry, momentum_map_lagrangian
from rclab.reduction import (
    HARNESS_KINDS,
    ReducibleSystem,
    check_commutation,
    check_reduced_legendre,
    check_rocl_equivalence,
    check_rpcl_equivalence,
    check_section_independence,
    orbit_reduce,
    point_reduce,
    reduced_field,
    reduced_two_form,
    routhian_expression,
    routhian_system,
    theorem_harness,
)

MU_CF = 1.0


def reduce_central_force(mu=MU_CF):
    sys = make_central_force()
    sym = TranslationSymmetry(sys.space, ["th"])
    return point_reduce(sys, sym, mu)


def reduce_pendulum_cart(mu=0.0):
    sys = make_pendulum_cart()
    sym = TranslationSymmetry(sys.space, ["s"])
    return point_reduce(sys, sym, mu)


def reduce_free_particle(mu=3.0):
    sys = make_free_particle()
    sym = TranslationSymmetry(sys.space, ["y"])
    return point_reduce(sys, sym, mu)


def make_two_cyclic():
    """Two commuting translations on a three-coordinate oscillator."""
    space = ConfigSpace(["x", "y", "z"], q_box=(-2.0, 2.0), v_box=(-2.0, 2.0))
    sys = LagrangianSystem(space, "0.5*(x_dot^2 + y_dot^2 + z_dot^2) - 0.5*z^2", {})
    return sys, TranslationSymmetry(space, ["x", "y"])


def make_forced_cart_rcl():
    """Drag on phi with the cart component chosen to keep p_s at zero."""
    sys = make_pendulum_cart()
    force = FiberMap.for_system(
        sys, ["0.2*m*l*cos(phi)*phi_dot/(M + m)", "-(0.2*phi_dot)"])
    control = ControlSubset(sys.space, ["phi"], offset=["s_dot", "phi_dot"])
    law = ControlLaw(sys.space,
                     FiberMap.for_system(sys, ["s_dot", "phi_dot - 0.1*sin(phi)"]),
                     control)
    return RCLSystem(sys, force, control, law)


def make_carrier(controlled=True, perturb=0.0):
    """An oscillator carrying one cyclic coordinate and its doubled image.

    The image momentum halves: p under the pushed Lagrangian is a quarter
    of the velocity, and velocities double, so mu_b = mu_a / 2.
    """
    space = ConfigSpace(["q1", "q2"], q_box=(-2.0, 2.0), v_box=(-2.0, 2.0))
    la = LagrangianSystem(space, "0.5*(q1_dot^2 + q2_dot^2) - 0.5*q2^2", {})
    target = ConfigSpace(["y1", "y2"], q_box=(-4.0, 4.0), v_box=(-4.0, 4.0))
    pmap = PointMap(space, target, ["2*q1", "2*q2"], ["0.5*y1", "0.5*y2"])
    bad = "0.125*(y1_dot^2 + y2_dot^2) - 0.125*y2^2 + {}*y2^2"
    if controlled:
        force = FiberMap.for_system(la, ["q1_dot", "-(0.5*q2)"])
        control = ControlSubset(space, ["q2"], offset=["q1_dot", "q2_dot"])
        law = ControlLaw(space,
                         FiberMap.for_system(la, ["q1_dot", "q2_dot - 0.3*q2"]),
                         control)
        a = RCLSystem(la, force, control, law)
        b = pushforward_rcl(pmap, a)
        if perturb:
            wrong = LagrangianSystem(target, bad.format(perturb), {})
            b = RCLSystem(wrong, b.force, b.control, b.law)
    else:
        a = la
        if perturb:
            b = LagrangianSystem(target, bad.format(perturb), {})
        else:
            b = pushforward_lagrangian(pmap, la)
    bundle_a = ReducibleSystem(a, TranslationSymmetry(space, ["q1"]), 0.7)
    bundle_b = ReducibleSystem(b, TranslationSymmetry(target, ["y1"]), 0.35)
    return bundle_a, bundle_b, pmap


# ---------------------------------------------------------------------------
# Sections and projection

def test_section_solves_cyclic_momentum():
    red = reduce_central_force()
    sym, sys = red.spec, red.sys
    rng = np.random.default_rng(0)
    for _ in range(50):
        x = red.space.sample(rng)
        z = red.section(x)
        p = momentum_map_lagrangian(sym, sys, z)
        assert abs(p[0] - MU_CF) <= 1e-12
        assert z.q[1] == 0.0
        assert_allclose(z.q[0], x.q[0], rtol=0, atol=0)
        assert_allclose(z.qdot[0], x.qdot[0], rtol=0, atol=0)


def test_section_matches_analytic_cart_velocity():
    for mu in (0.0, 0.4):
        red = reduce_pendulum_cart(mu)
        rng = np.random.default_rng(1)
        for _ in range(25):
            x = red.space.sample(rng)
            z = red.section(x)
            want = (mu - np.cos(x.q[0]) * x.qdot[0]) / 2.0
            assert_allclose(z.qdot[0], want, atol=1e-13)


def test_project_inverts_section():
    for red in (reduce_central_force(), reduce_pendulum_cart(0.4)):
        rng = np.random.default_rng(2)
        for _ in range(25):
            x = red.space.sample(rng)
            back = red.project(red.section(x))
            assert_allclose(back.q, x.q, atol=1e-14)
            assert_allclose(back.qdot, x.qdot, rtol=0, atol=0)


def test_reduced_chart_geometry():
    red = reduce_pendulum_cart()
    assert list(red.space.coords) == ["phi"]
    assert list(red.space.periodic) == [True]
    assert_allclose(red.space.q_box[0], [0.0, TWO_PI])
    cf = reduce_central_force()
    assert list(cf.space.coords) == ["r"]
    assert list(cf.space.periodic) == [False]
    assert_allclose(cf.space.q_box[0], [0.6, 2.5])


def test_section_offsets_respected():
    red = reduce_central_force()
    moved = red.with_section_offsets([1.3])
    x = TangentPoint([1.1], [0.2])
    assert moved.section(x).q[1] == 1.3
    assert moved.invariance is red.invariance
    assert moved.regular_value is red.regular_value
    f1, f2 = reduced_field(red), reduced_field(moved)
    rng = np.random.default_rng(3)
    for _ in range(20):
        x = red.space.sample(rng)
        assert_allclose(f1(x).as_vector(), f2(x).as_vector(), atol=1e-12)


def test_section_offset_validation():
    sys = make_central_force()
    sym = TranslationSymmetry(sys.space, ["th"])
    with pytest.raises(ValueError, match="one section offset per cyclic"):
        point_reduce(sys, sym, MU_CF, section_offsets=[0.1, 0.2])


# ---------------------------------------------------------------------------
# Reduced Lagrangian data against closed forms

def test_reduced_values_central_force():
    red = reduce_central_force()
    x = TangentPoint([1.0], [0.0])
    assert_allclose(red.lagrangian_value(x), 1.5, atol=1e-14)
    A, E = red.action_energy(x)
    assert_allclose(A, 1.0, atol=1e-14)
    assert_allclose(E, -0.5, atol=1e-14)
    rng = np.random.default_rng(4)
    for _ in range(50):
        x = red.space.sample(rng)
        r, rdot = x.q[0], x.qdot[0]
        want_l = 0.5 * rdot ** 2 + MU_CF ** 2 / (2 * r ** 2) + 1.0 / r
        want_e = 0.5 * rdot ** 2 + MU_CF ** 2 / (2 * r ** 2) - 1.0 / r
        assert_allclose(red.lagrangian_value(x), want_l, atol=1e-13)
        assert_allclose(red.action_energy(x)[1], want_e, atol=1e-13)


def test_reduced_values_free_particle():
    red = reduce_free_particle()
    rng = np.random.default_rng(5)
    for _ in range(25):
        x = red.space.sample(rng)
        assert_allclose(red.lagrangian_value(x), 0.5 * x.qdot[0] ** 2 + 4.5,
                        atol=1e-14)


def test_reduced_two_form_central_force():
    red = reduce_central_force()
    rng = np.random.default_rng(6)
    for _ in range(25):
        x = red.space.sample(rng)
        form = reduced_two_form(red, x)
        assert form.symplectic
        assert_allclose(form.matrix, [[0.0, 1.0], [-1.0, 0.0]], atol=1e-12)


def test_reduced_two_form_cart_schur_mass():
    # the dr/\dv coefficient is the shape-shape mass with the cyclic row
    # eliminated: m*l^2 - (m*l*cos(phi))^2 / (M + m)
    red = reduce_pendulum_cart(0.4)
    rng = np.random.default_rng(7)
    for _ in range(25):
        x = red.space.sample(rng)
        form = reduced_two_form(red, x).matrix
        want = 1.0 - 0.5 * np.cos(x.q[0]) ** 2
        assert_allclose(form, [[0.0, want], [-want, 0.0]], atol=1e-12)


def test_energy_gradient_closed_form():
    red = reduce_central_force()
    rng = np.random.default_rng(8)
    for _ in range(50):
        x = red.space.sample(rng)
        r = x.q[0]
        want = np.array([-MU_CF ** 2 / r ** 3 + 1.0 / r ** 2, x.qdot[0]])
        assert_allclose(red.energy_gradient(x), want, atol=1e-12)


def test_reduced_field_central_force_closed_form():
    red = reduce_central_force()
    field = reduced_field(red)
    out = field(TangentPoint([1.0], [0.0]))
    assert_allclose(out.dq, [0.0], atol=1e-12)
    assert_allclose(out.dqdot, [0.0], atol=1e-12)
    out = field(TangentPoint([2.0], [0.0]))
    assert_allclose(out.dqdot, [-0.125], atol=1e-12)
    rng = np.random.default_rng(9)
    for _ in range(200):
        x = red.space.sample(rng)
        r = x.q[0]
        out = field(x)
        assert_allclose(out.dq, x.qdot, rtol=0, atol=0)
        assert_allclose(out.dqdot, [MU_CF ** 2 / r ** 3 - 1.0 / r ** 2],
                        atol=1e-9)


def test_reduced_field_free_particle_exact():
    red = reduce_free_particle()
    field = reduced_field(red)
    rng = np.random.default_rng(10)
    for _ in range(50):
        x = red.space.sample(rng)
        out = field(x)
        assert_allclose(out.dq, x.qdot, rtol=0, atol=0)
        assert_allclose(out.dqdot, [0.0], rtol=0, atol=0)


def test_reduced_field_cart_closed_form():
    red = reduce_pendulum_cart(0.0)
    field = reduced_field(red)
    rng = np.random.default_rng(11)
    for _ in range(100):
        x = red.space.sample(rng)
        phi, w = x.q[0], x.qdot[0]
        s, c = np.sin(phi), np.cos(phi)
        want = (s - 0.5 * w ** 2 * s * c) / (1.0 - 0.5 * c ** 2)
        assert_allclose(field(x).dqdot, [want], atol=1e-10)


def test_energy_gradient_annihilates_field():
    for red in (reduce_central_force(), reduce_pendulum_cart(0.4)):
        field = reduced_field(red)
        rng = np.random.default_rng(12)
        for _ in range(200):
            x = red.space.sample(rng)
            out = field(x)
            rate = red.energy_gradient(x) @ np.concatenate([out.dq, out.dqdot])
            assert abs(rate) <= 1e-9


def test_two_cyclic_reduction():
    sys, sym = make_two_cyclic()
    red = point_reduce(sys, sym, [0.1, 0.2])
    x = TangentPoint([0.4], [0.2])
    assert_allclose(red.lagrangian_value(x), 0.5 * 0.04 + 0.025 - 0.5 * 0.16,
                    atol=1e-14)
    assert_allclose(reduced_field(red)(x).dqdot, [-0.4], atol=1e-13)
    assert check_commutation(red, samples=100).ok


# ---------------------------------------------------------------------------
# Routhian emission

def test_routhian_matches_reduced_field_central_force():
    red = reduce_central_force()
    routh = routhian_system(red)
    f_routh = euler_lagrange_field(routh)
    f_red = reduced_field(red)
    rng = np.random.default_rng(13)
    for _ in range(200):
        x = red.space.sample(rng)
        assert_allclose(f_routh(x).as_vector(), f_red(x).as_vector(), atol=1e-9)


def test_routhian_closed_form_central_force():
    # R = L - mu*th_dot with th_dot eliminated flips the sign of the
    # centrifugal term relative to the plain substituted Lagrangian
    routh = routhian_system(reduce_central_force())
    rng = np.random.default_rng(14)
    for _ in range(50):
        x = routh.space.sample(rng)
        r, rdot = x.q[0], x.qdot[0]
        want = 0.5 * rdot ** 2 - MU_CF ** 2 / (2 * r ** 2) + 1.0 / r
        assert_allclose(routh.lagrangian_value(x), want, atol=1e-13)


def test_routhian_matches_reduced_field_cart():
    red = reduce_pendulum_cart(0.4)
    f_routh = euler_lagrange_field(routhian_system(red))
    f_red = reduced_field(red)
    rng = np.random.default_rng(15)
    for _ in range(100):
        x = red.space.sample(rng)
        assert_allclose(f_routh(x).as_vector(), f_red(x).as_vector(), atol=1e-9)


def test_routhian_needs_single_cyclic_coordinate():
    sys, sym = make_two_cyclic()
    red = point_reduce(sys, sym, [0.1, 0.2])
    with pytest.raises(ValueError, match="exactly one cyclic coordinate"):
        routhian_expression(red)


def test_routhian_needs_affine_cyclic_momentum():
    space = ConfigSpace(["x", "y"], q_box=(-1.0, 1.0), v_box=(-0.9, 0.9))
    sys = LagrangianSystem(space, "0.5*x_dot^2*(1 + y_dot^2) + 0.5*y_dot^2 - 0.5*y^2",
                           {})
    red = point_reduce(sys, TranslationSymmetry(space, ["x"]), 0.3)
    with pytest.raises(ValueError, match="not affine in the cyclic velocity"):
        routhian_expression(red)


# ---------------------------------------------------------------------------
# Construction invariance checks

def test_section_independence():
    cases = [reduce_central_force(), reduce_pendulum_cart(0.4),
             reduce_free_particle()]
    for red in cases:
        rep = check_section_independence(red, samples=40)
        assert rep.ok
        assert rep.max_discrepancy <= 1e-9
        assert set(rep.detail) == {"l", "E", "two_form", "field", "sheared"}


def test_commutation_plain():
    for red in (reduce_central_force(), reduce_pendulum_cart(0.0),
                reduce_pendulum_cart(0.4)):
        rep = check_commutation(red, samples=200)
        assert rep.ok
        assert rep.max_discrepancy <= 1e-8
    rep = check_commutation(reduce_free_particle(), samples=100)
    assert rep.max_discrepancy == 0.0


def test_commutation_with_force_and_law():
    rcl = make_forced_cart_rcl()
    sym = TranslationSymmetry(rcl.sys.space, ["s"])
    red = point_reduce(rcl, sym, 0.0)
    assert red.force_red is not None and red.law_red is not None
    assert red.law_certificate is not None and red.law_certificate.ok
    rep = check_commutation(red, samples=200)
    assert rep.ok and rep.max_discrepancy <= 1e-8

    cf = make_central_force()
    drag = FiberMap.for_system(cf, ["-(0.3*r_dot)", "th_dot"])
    red = point_reduce(RCLSystem(cf, drag), TranslationSymmetry(cf.space, ["th"]),
                       MU_CF)
    rep = check_commutation(red, samples=200)
    assert rep.ok and rep.max_discrepancy <= 1e-8


def test_reduced_legendre():
    for red in (reduce_central_force(), reduce_pendulum_cart(0.4)):
        rep = check_reduced_legendre(red, samples=60)
        assert rep.ok
        assert rep.max_discrepancy <= 1e-8
        assert rep.detail["orbit_correction"] == 0.0
        assert rep.detail["orbit_point_gap"] == 0.0
        assert {"pullback", "diagram"} <= set(rep.detail)


# ---------------------------------------------------------------------------
# Trajectory consistency

def _trajectory_gap(red, x0, t1=5.0, h=1e-3):
    z0 = red.section(x0)
    up = integrate(euler_lagrange_field(red.sys), z0, t1, h)
    down = integrate(reduced_field(red), x0, t1, h)
    assert not up.blown_up and not down.blown_up
    worst = 0.0
    for zu, xd in zip(up.states, down.states):
        xp = red.project(zu)
        worst = max(worst,
                    float(np.max(np.abs(red.space.coord_delta(xp.q, xd.q)))),
                    float(np.max(np.abs(xp.qdot - xd.qdot))))
    p_final = momentum_map_lagrangian(red.spec, red.sys, up.final)
    return worst, float(np.max(np.abs(p_final - red.mu)))


def test_trajectory_consistency_central_force():
    red = reduce_central_force()
    gap, drift = _trajectory_gap(red, TangentPoint([1.2], [0.3]))
    assert gap <= 1e-5
    assert drift <= 1e-8


def test_trajectory_consistency_pendulum_cart():
    red = reduce_pendulum_cart(0.0)
    gap, drift = _trajectory_gap(red, TangentPoint([0.9], [0.4]))
    assert gap <= 1e-5
    assert drift <= 1e-8


# ---------------------------------------------------------------------------
# Construction failure modes

def test_point_reduce_rejects_non_invariant():
    sys = make_ho()
    sym = TranslationSymmetry(sys.space, ["q"])
    with pytest.raises(ValueError, match="not invariant under the declared"):
        point_reduce(sys, sym, 0.5)


def test_point_reduce_rejects_level_breaking_force():
    sys = make_central_force()
    drag = FiberMap.for_system(sys, ["-(0.3*r_dot)", "-(0.3*th_dot)"])
    sym = TranslationSymmetry(sys.space, ["th"])
    with pytest.raises(ValueError, match="does not preserve the momentum level"):
        point_reduce(RCLSystem(sys, drag), sym, MU_CF)


def test_point_reduce_rejects_unreachable_control():
    sys = make_central_force()
    control = ControlSubset(sys.space, ["r"])
    sym = TranslationSymmetry(sys.space, ["th"])
    with pytest.raises(ValueError, match="does not meet the momentum level"):
        point_reduce(RCLSystem(sys, None, control), sym, MU_CF)


def test_point_reduce_input_validation():
    sys = make_central_force()
    other = make_central_force()
    with pytest.raises(ValueError, match="different configuration space"):
        point_reduce(sys, TranslationSymmetry(other.space, ["th"]), MU_CF)
    sym = TranslationSymmetry(sys.space, ["th"])
    with pytest.raises(ValueError, match="must have 1 components"):
        point_reduce(sys, sym, [1.0, 2.0])
    fp = make_free_particle()
    with pytest.raises(ValueError, match="nothing remains to reduce"):
        point_reduce(fp, TranslationSymmetry(fp.space, ["x", "y"]), [0.1, 0.2])


def test_cyclic_actuated_directions_dropped():
    sys = make_pendulum_cart()
    sym = TranslationSymmetry(sys.space, ["s"])
    control = ControlSubset(sys.space, ["s"], offset=["s_dot", "phi_dot"])
    with pytest.warns(UserWarning, match="cannot influence the reduced chart"):
        red = point_reduce(RCLSystem(sys, None, control), sym, 0.0)
    assert red.control_red is None
    assert red.dropped_actuated == ("s",)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        clone = red.with_section_offsets([0.5])
    assert clone.dropped_actuated == ("s",)


# ---------------------------------------------------------------------------
# Descended maps

def test_reduced_fiber_map_value_and_directional():
    rcl = make_forced_cart_rcl()
    sym = TranslationSymmetry(rcl.sys.space, ["s"])
    red = point_reduce(rcl, sym, 0.0)
    x = TangentPoint([0.5], [0.3])
    assert_allclose(red.force_red.value(x), [-0.06], atol=1e-14)
    rng = np.random.default_rng(16)
    eps = 1e-6
    for _ in range(20):
        x = red.space.sample(rng)
        dq = rng.uniform(-1.0, 1.0, 1)
        dv = rng.uniform(-1.0, 1.0, 1)
        plus = red.force_red.value(TangentPoint(x.q + eps * dq, x.qdot + eps * dv))
        minus = red.force_red.value(TangentPoint(x.q - eps * dq, x.qdot - eps * dv))
        fd = (plus - minus) / (2 * eps)
        assert_allclose(red.force_red.directional(x, dq, dv), fd, atol=1e-6)


def test_reduced_control_subset_carries_bounds():
    sys = make_pendulum_cart()
    sym = TranslationSymmetry(sys.space, ["s"])
    control = ControlSubset(sys.space, ["phi"], offset=["s_dot", "phi_dot"],
                            bounds=[(-0.5, 0.5)])
    red = point_reduce(RCLSystem(sys, None, control), sym, 0.0)
    sub = red.control_red
    assert sub is not None
    assert sub.actuated_names == ("phi",)
    assert_allclose(sub.lo, [-0.5])
    assert_allclose(sub.hi, [0.5])
    x = TangentPoint([0.7], [0.2])
    inside = sub.offset(x) + np.array([0.3])
    outside = sub.offset(x) + np.array([0.8])
    assert sub.membership_gap(x, inside) <= 1e-12
    assert_allclose(sub.membership_gap(x, outside), 0.3, atol=1e-12)
    rng = np.random.default_rng(17)
    for _ in range(20):
        w = sub.sample_member(x, rng)
        assert sub.membership_gap(x, w) <= 1e-12


# ---------------------------------------------------------------------------
# Reducible-pair equivalence

def test_rpcl_identity_pair():
    sys = make_central_force()
    sym = TranslationSymmetry(sys.space, ["th"])
    bundle = ReducibleSystem(sys, sym, MU_CF)
    pmap = PointMap(sys.space, sys.space, ["r", "th"], ["r", "th"])
    rep = check_rpcl_equivalence(bundle, bundle, pmap, samples=30)
    assert rep.ok
    assert rep.kind == "rpcl"
    assert rep.mode == "solvable"
    names = [c.condition for c in rep.conditions]
    assert names == ["level-sets", "equivariance", "control-subsets", "fields"]
    vacuous = rep.conditions[2]
    assert vacuous.detail == "no control subsets declared"


def test_rpcl_requires_inverse():
    sys = make_central_force()
    sym = TranslationSymmetry(sys.space, ["th"])
    bundle = ReducibleSystem(sys, sym, MU_CF)
    pmap = PointMap(sys.space, sys.space, ["r", "th"])
    with pytest.raises(ValueError, match="supply inverse expressions"):
        check_rpcl_equivalence(bundle, bundle, pmap, samples=10)


def test_rpcl_detects_momentum_mismatch():
    sys = make_central_force()
    sym = TranslationSymmetry(sys.space, ["th"])
    a = ReducibleSystem(sys, sym, MU_CF)
    b = ReducibleSystem(sys, sym, MU_CF + 0.3)
    pmap = PointMap(sys.space, sys.space, ["r", "th"], ["r", "th"])
    rep = check_rpcl_equivalence(a, b, pmap, samples=20)
    assert not rep.ok
    level = rep.conditions[0]
    assert level.condition == "level-sets" and not level.ok
    assert level.max_residual >= 0.3 - 1e-12


def test_rpcl_carrier_pair():
    a, b, pmap = make_carrier()
    rep = check_rpcl_equivalence(a, b, pmap, samples=40)
    assert rep.ok
    assert rep.mode == "direct"
    for cond in rep.conditions:
        assert cond.ok
        assert cond.max_residual <= 1e-8


def test_rpcl_one_sided_control():
    a, b, pmap = make_carrier()
    plain_b = ReducibleSystem(b.sys, b.spec, b.mu)
    rep = check_rpcl_equivalence(a, plain_b, pmap, samples=20)
    assert not rep.ok
    control = rep.conditions[2]
    assert control.condition == "control-subsets"
    assert not control.ok
    assert control.max_residual == float("inf")
    assert control.detail == "control subset declared on one side only"


def test_rpcl_rejects_perturbed_image():
    a, b, pmap = make_carrier(perturb=0.1)
    rep = check_rpcl_equivalence(a, b, pmap, samples=40)
    assert not rep.ok
    fields = rep.conditions[3]
    assert fields.condition == "fields" and not fields.ok
    assert fields.max_residual > 1e-3


def test_rocl_adds_correction_condition():
    a, b, pmap = make_carrier()
    rep = check_rocl_equivalence(a, b, pmap, samples=30)
    assert rep.ok
    assert rep.kind == "rocl"
    assert rep.conditions[-1].condition == "correction-form"
    assert rep.conditions[-1].max_residual == 0.0
    with pytest.raises(ValueError, match="non-abelian orbit reduction"):
        check_rocl_equivalence(a, b, pmap, algebra_a=LieAlgebra.so3(), samples=10)


def test_mu_shape_validated_on_bundles():
    sys = make_central_force()
    sym = TranslationSymmetry(sys.space, ["th"])
    with pytest.raises(ValueError, match="must have 1 components"):
        ReducibleSystem(sys, sym, [0.1, 0.2])


# ---------------------------------------------------------------------------
# Orbit reduction

def test_orbit_reduce_coincides_with_point():
    sys = make_central_force()
    sym = TranslationSymmetry(sys.space, ["th"])
    red_o = orbit_reduce(sys, sym, MU_CF)
    red_p = point_reduce(sys, sym, MU_CF)
    cert = red_o.orbit_certificate
    assert cert is not None and cert.abelian
    assert cert.correction_max == 0.0
    assert "coincide" in cert.note
    f_o, f_p = reduced_field(red_o), reduced_field(red_p)
    rng = np.random.default_rng(18)
    for _ in range(25):
        x = red_o.space.sample(rng)
        assert_allclose(f_o(x).as_vector(), f_p(x).as_vector(), rtol=0, atol=0)


def test_orbit_reduce_algebra_validation():
    sys = make_central_force()
    sym = TranslationSymmetry(sys.space, ["th"])
    with pytest.raises(ValueError, match="does not match the 1 declared"):
        orbit_reduce(sys, sym, MU_CF, algebra=LieAlgebra.abelian(2))
    space = ConfigSpace(["x", "y", "z", "w"], q_box=(-2.0, 2.0), v_box=(-2.0, 2.0))
    flat = LagrangianSystem(
        space, "0.5*(x_dot^2 + y_dot^2 + z_dot^2 + w_dot^2) - 0.5*w^2", {})
    sym3 = TranslationSymmetry(space, ["x", "y", "z"])
    with pytest.raises(ValueError, match="non-abelian orbit reduction"):
        orbit_reduce(flat, sym3, [0.1, 0.0, 0.2], algebra=LieAlgebra.so3())


# ---------------------------------------------------------------------------
# Upstairs/downstairs harness

def test_theorem_harness_verdicts_agree():
    ctrl = [("push", *make_carrier()), ("perturbed", *make_carrier(perturb=0.1))]
    lag = [("push", *make_carrier(controlled=False)),
           ("perturbed", *make_carrier(controlled=False, perturb=0.1))]
    reports = {}
    for kind in HARNESS_KINDS:
        pairs = ctrl if kind.startswith("controlled") else lag
        rep = theorem_harness(kind, pairs, samples=30)
        reports[kind] = rep
        assert rep.ok
        good, bad = rep.entries
        assert good.name == "push"
        assert good.upstairs_ok and good.downstairs_ok
        assert good.upstairs_residual <= 1e-8
        assert good.downstairs_residual <= 1e-8
        assert not bad.upstairs_ok and not bad.downstairs_ok
        assert bad.upstairs_residual > 1e-3
        assert bad.downstairs_residual > 1e-3
        assert good.agree and bad.agree
    for point, orbit in (("controlled-point", "controlled-orbit"),
                         ("lagrangian-point", "lagrangian-orbit")):
        for e1, e2 in zip(reports[point].entries, reports[orbit].entries):
            assert e1.upstairs_residual == e2.upstairs_residual
            assert e1.downstairs_residual == e2.downstairs_residual


def test_theorem_harness_rejects_unknown_kind():
    with pytest.raises(ValueError, match="unknown harness kind"):
        theorem_harness("thm-anything", [])


def test_harness_report_serializes():
    rep = theorem_harness("lagrangian-point",
                          [("push", *make_carrier(controlled=False))], samples=10)
    d = rep.as_dict()
    assert d["pass"] is True
    assert d["kind"] == "lagrangian-point"
    assert d["entries"][0]["agree"] is True

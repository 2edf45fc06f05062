"""Cyclic-coordinate reduction at a fixed momentum value.

When the Lagrangian ignores some coordinates, the conjugate momenta are
conserved and the ignored degrees of freedom can be eliminated at a chosen
momentum value mu.  The quotient is realized as a chart on the remaining
(shape) coordinates:

  * a section rebuilds a full state from a reduced one by pinning the
    cyclic positions at fixed offsets and solving the cyclic velocities
    from the momentum constraint, and
  * a projection drops the cyclic slots.

Forms, energies, fields, forces and controls all descend along these two
maps.  Section offsets are arbitrary; the checks in this module certify
that nothing downstream depends on them.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .control import (
    ConditionReport,
    ControlSubset,
    FiberMap,
    LawCertificate,
    RCLSystem,
    control_match_solve,
    controlled_field,
)
from .dynamics import SECOND_ORDER_GUARD, VectorFieldOnTQ, euler_lagrange_field
from .expr import (
    VELOCITY_SUFFIX,
    BinOp,
    Num,
    Var,
    differentiate,
    fold_constants,
    free_names,
    substitute,
)
from .geometry import (
    ConfigSpace,
    DoubleTangentVector,
    PointMap,
    TangentPoint,
    TwoFormAtPoint,
    pullback_form,
    tangent_lift,
    tangent_lift_jacobian,
)
from .lagrangian import (
    LagrangianSystem,
    NewtonError,
    lagrangian_two_form,
    legendre_transform,
)
from .symmetry import (
    LieAlgebra,
    SampledReport,
    TranslationSymmetry,
    check_invariance,
    check_regular_value,
    coadjoint_plus_form,
    momentum_map_lagrangian,
)

SECTION_SOLVE_TOL = 1e-12
SECTION_SOLVE_MAX_ITER = 50
LEVEL_TOL = 1e-9
DEFAULT_CHECK_TOL = 1e-8

HARNESS_KINDS = ("controlled-point", "lagrangian-point",
                 "controlled-orbit", "lagrangian-orbit")


def _as_rcl(parent: Union[RCLSystem, LagrangianSystem]) -> RCLSystem:
    if isinstance(parent, RCLSystem):
        return parent
    return RCLSystem(parent)


@dataclass(frozen=True)
class _Frame:
    """Per-point cache: section image, its derivative blocks, and J_sigma."""

    z: TangentPoint
    blocks: object
    J_section: np.ndarray


@dataclass(frozen=True)
class OrbitCertificate:
    """Record that the orbit-form correction vanishes for an abelian algebra."""

    abelian: bool
    correction_max: float
    note: str


class ReducedFiberMap:
    """Fiber map on the reduced chart: project after the parent map after section."""

    def __init__(self, red: "ReducedSystem", parent_map: FiberMap):
        self.red = red
        self.map = parent_map

    def value(self, x: TangentPoint) -> np.ndarray:
        return self.map.value(self.red.section(x))[self.red.shape]

    def directional(self, x: TangentPoint, dq, dqdot) -> np.ndarray:
        return self._directional(self.red.frame(x), dq, dqdot)

    def _directional(self, frame: _Frame, dq, dqdot) -> np.ndarray:
        Jq, Jv = self.map.jacobians(frame.z)
        dx = np.concatenate([np.asarray(dq, float), np.asarray(dqdot, float)])
        full = np.hstack([Jq, Jv]) @ (frame.J_section @ dx)
        return full[self.red.shape]


class ReducedControlSubset:
    """Affine slice on the reduced chart induced by a parent control subset.

    Actuated directions along cyclic coordinates cannot influence the shape
    chart and are dropped (the caller warns).  The offset map descends by
    composition with the section.
    """

    def __init__(self, red: "ReducedSystem", parent: ControlSubset,
                 kept: Sequence[int]):
        self.red = red
        self.parent = parent
        pos = [parent.actuated.index(i) for i in kept]
        self.actuated = tuple(red.shape.index(i) for i in kept)
        self.actuated_names = tuple(red.space.coords[i] for i in self.actuated)
        self._free = tuple(i for i in range(red.space.n) if i not in self.actuated)
        self.lo = parent.lo[pos].copy()
        self.hi = parent.hi[pos].copy()
        self._offset = (ReducedFiberMap(red, parent.offset_map)
                        if parent.offset_map is not None else None)

    @property
    def dim(self) -> int:
        return len(self.actuated)

    def offset(self, x: TangentPoint) -> np.ndarray:
        if self._offset is None:
            return np.zeros(self.red.space.n)
        return self._offset.value(x)

    def membership_gap(self, x: TangentPoint, w) -> float:
        return self._gap(np.asarray(w, float) - self.offset(x))

    def direction_gap(self, w) -> float:
        return self._gap(np.asarray(w, float))

    def _gap(self, d: np.ndarray) -> float:
        off = float(np.max(np.abs(d[list(self._free)]))) if self._free else 0.0
        da = d[list(self.actuated)]
        excess = np.maximum(self.lo - da, 0.0) + np.maximum(da - self.hi, 0.0)
        return max(off, float(np.max(excess)) if len(excess) else 0.0)

    def sample_member(self, x: TangentPoint, rng: np.random.Generator,
                      scale: float = 1.0) -> np.ndarray:
        w = self.offset(x)
        for j, i in enumerate(self.actuated):
            lo, hi = self.lo[j], self.hi[j]
            if np.isfinite(lo) and np.isfinite(hi):
                a, b = lo, hi
            elif np.isfinite(lo):
                a, b = lo, lo + 2.0 * scale
            elif np.isfinite(hi):
                a, b = hi - 2.0 * scale, hi
            else:
                a, b = -scale, scale
            w[i] += rng.uniform(a, b)
        return w


class ReducedSystem:
    """A Lagrangian (or controlled) system descended to the shape chart.

    Instances are built by point_reduce or orbit_reduce, which run the
    certification; the constructor only assembles the chart machinery.
    """

    def __init__(self, rcl: RCLSystem, spec: TranslationSymmetry, mu,
                 offsets=None):
        self.rcl = rcl
        self.sys = rcl.sys
        self.spec = spec
        self.mu = np.asarray(mu, dtype=float).reshape(-1)
        if self.mu.shape != (spec.k,):
            raise ValueError(f"momentum value must have {spec.k} components")
        self.cyclic = list(spec.cyclic)
        self.shape = list(spec.shape)
        if not self.shape:
            raise ValueError("every coordinate is cyclic; nothing remains to reduce to")
        self.k = spec.k
        if offsets is None:
            offsets = np.zeros(self.k)
        self.offsets = np.asarray(offsets, dtype=float).reshape(-1)
        if self.offsets.shape != (self.k,):
            raise ValueError("need one section offset per cyclic coordinate")
        parent_space = self.sys.space
        self.space = ConfigSpace(
            [parent_space.coords[i] for i in self.shape],
            parent_space.q_box[self.shape],
            parent_space.v_box[self.shape],
            periodic=[parent_space.periodic[i] for i in self.shape],
        )
        self.invariance: Optional[SampledReport] = None
        self.regular_value = None
        self.force_red: Optional[ReducedFiberMap] = None
        self.control_red: Optional[ReducedControlSubset] = None
        self.law_red: Optional[ReducedFiberMap] = None
        self.law_certificate: Optional[LawCertificate] = None
        self.dropped_actuated: Tuple[str, ...] = ()
        self.orbit_certificate: Optional[OrbitCertificate] = None

    @property
    def n(self) -> int:
        return self.space.n

    # -- the two legs of the quotient ------------------------------------

    def section(self, x: TangentPoint) -> TangentPoint:
        """Full state over x: cyclic positions pinned, velocities solved."""
        n = self.sys.n
        q = np.empty(n)
        q[self.shape] = x.q
        q[self.cyclic] = self.offsets
        qdot = np.empty(n)
        qdot[self.shape] = x.qdot
        qdot[self.cyclic] = 0.0
        for _ in range(SECTION_SOLVE_MAX_ITER):
            z = TangentPoint(q, qdot)
            b = self.sys.blocks(z)
            r = b.p[self.cyclic] - self.mu
            if float(np.max(np.abs(r))) <= SECTION_SOLVE_TOL:
                return z
            qdot[self.cyclic] -= np.linalg.solve(b.M[np.ix_(self.cyclic, self.cyclic)], r)
        raise NewtonError(
            f"cyclic velocity solve stalled at residual {np.max(np.abs(r)):.3e} "
            f"for reduced state q={x.q.tolist()}, qdot={x.qdot.tolist()}"
        )

    def project(self, z: TangentPoint) -> TangentPoint:
        """Drop the cyclic slots; the inverse of any section on its image."""
        return TangentPoint(self.space.wrap(z.q[self.shape]), z.qdot[self.shape])

    def frame(self, x: TangentPoint) -> _Frame:
        """Section image, derivative blocks there, and the section Jacobian."""
        z = self.section(x)
        b = self.sys.blocks(z)
        n, m = self.sys.n, self.space.n
        Mcc = b.M[np.ix_(self.cyclic, self.cyclic)]
        J = np.zeros((2 * n, 2 * m))
        for col, i in enumerate(self.shape):
            J[i, col] = 1.0
            J[n + i, m + col] = 1.0
        J[np.ix_([n + c for c in self.cyclic], range(m))] = (
            -np.linalg.solve(Mcc, b.B[np.ix_(self.cyclic, self.shape)]))
        J[np.ix_([n + c for c in self.cyclic], range(m, 2 * m))] = (
            -np.linalg.solve(Mcc, b.M[np.ix_(self.cyclic, self.shape)]))
        return _Frame(z=z, blocks=b, J_section=J)

    def section_jacobian(self, x: TangentPoint) -> np.ndarray:
        return self.frame(x).J_section

    def shear_basis(self, x: TangentPoint) -> np.ndarray:
        """Directions tangent to the momentum level set that project to zero.

        One column per cyclic coordinate: a unit shift of the cyclic position
        with the cyclic velocities corrected to stay on the level set.  Any
        lift of a reduced tangent vector may be sheared by these without
        changing the value of the reduced two-form.
        """
        b = self.frame(x).blocks
        n = self.sys.n
        Mcc = b.M[np.ix_(self.cyclic, self.cyclic)]
        S = np.zeros((2 * n, self.k))
        for col, c in enumerate(self.cyclic):
            S[c, col] = 1.0
        S[np.ix_([n + c for c in self.cyclic], range(self.k))] = (
            -np.linalg.solve(Mcc, b.B[np.ix_(self.cyclic, self.cyclic)]))
        return S

    # -- reduced Lagrangian data ------------------------------------------

    def lagrangian_value(self, x: TangentPoint) -> float:
        return self.sys.lagrangian_value(self.section(x))

    def action_energy(self, x: TangentPoint) -> Tuple[float, float]:
        b = self.frame(x).blocks
        z_qdot = self.section(x).qdot
        A = float(b.p @ z_qdot)
        return A, A - b.L

    def energy_gradient(self, x: TangentPoint) -> np.ndarray:
        frame = self.frame(x)
        return frame.J_section.T @ _energy_gradient_from_blocks(frame)

    def with_section_offsets(self, offsets) -> "ReducedSystem":
        """Clone onto a different section; certificates carry over."""
        other = ReducedSystem(self.rcl, self.spec, self.mu, offsets=offsets)
        other.invariance = self.invariance
        other.regular_value = self.regular_value
        _attach_reduced_maps(other, warn=False)
        other.law_certificate = self.law_certificate
        other.orbit_certificate = self.orbit_certificate
        return other


def _energy_gradient_from_blocks(frame: _Frame) -> np.ndarray:
    b = frame.blocks
    qdot = frame.z.qdot
    return np.concatenate([b.B.T @ qdot - b.L_q, b.M @ qdot])


def reduced_two_form(red: ReducedSystem, x: TangentPoint,
                     frame: Optional[_Frame] = None) -> TwoFormAtPoint:
    """Pullback of the parent form through the section: J_sigma^T W J_sigma."""
    frame = frame or red.frame(x)
    full = lagrangian_two_form(red.sys, frame.z)
    return pullback_form(frame.J_section, full, base=x, symplectic=True,
                         min_singular_value=red.sys.tol.form_min_sv)


def reduced_field(red: ReducedSystem) -> VectorFieldOnTQ:
    """Dynamics on the shape chart, with descended force and law lifts."""
    m = red.space.n
    lifts = [fm for fm in (red.force_red, red.law_red) if fm is not None]

    def ev(x: TangentPoint) -> DoubleTangentVector:
        frame = red.frame(x)
        omega = reduced_two_form(red, x, frame=frame)
        grad = frame.J_section.T @ _energy_gradient_from_blocks(frame)
        xi = np.linalg.solve(-omega.matrix, grad)
        gap = float(np.max(np.abs(xi[:m] - x.qdot)))
        if gap > SECOND_ORDER_GUARD * max(1.0, float(np.max(np.abs(x.qdot)))):
            raise RuntimeError(
                f"reduced field lost second-order form: |dq - qdot| = {gap:.3e}")
        dq = x.qdot.copy()
        acc = xi[m:].copy()
        for fm in lifts:
            acc = acc + fm._directional(frame, dq, xi[m:])
        return DoubleTangentVector(x, dq, acc)

    return VectorFieldOnTQ(ev, provenance="reduced-euler-lagrange")


# -- construction -----------------------------------------------------------


def _certify_force_level(red: ReducedSystem, samples: int, seed: int,
                         tol: float) -> None:
    force = red.rcl.force
    rng = np.random.default_rng(seed)
    worst, witness = 0.0, None
    for _ in range(samples):
        x = red.space.sample(rng)
        z = red.spec.act(red.spec.sample_group(rng), red.section(x))
        image = TangentPoint(z.q, force.value(z))
        r = float(np.max(np.abs(
            momentum_map_lagrangian(red.spec, red.sys, image) - red.mu)))
        if r > worst:
            worst, witness = r, z
    if worst > tol:
        raise ValueError(
            f"force map does not preserve the momentum level set: "
            f"max gap {worst:.3e} at q={witness.q.tolist()}, "
            f"qdot={witness.qdot.tolist()}"
        )


def _level_control_value(sys: LagrangianSystem, spec: TranslationSymmetry,
                         subset: ControlSubset, mu: np.ndarray, z: TangentPoint,
                         spread: Optional[np.ndarray] = None) -> np.ndarray:
    """An admissible fiber value at z lying on the momentum level set.

    Newton-solves the actuated components against the momentum constraint,
    starting from the slice offset; an optional spread vector is added along
    the constraint's null space (and re-polished) to vary the sample.
    """
    D = list(subset.actuated)
    anchor = subset.offset(z)
    alpha = np.zeros(len(D))

    def polish(alpha: np.ndarray) -> Tuple[np.ndarray, float, np.ndarray]:
        for _ in range(30):
            w = anchor.copy()
            w[D] += alpha
            image = TangentPoint(z.q, w)
            r = momentum_map_lagrangian(spec, sys, image) - mu
            if float(np.max(np.abs(r))) <= SECTION_SOLVE_TOL:
                break
            Jr = sys.blocks(image).M[np.ix_(list(spec.cyclic), D)]
            alpha = alpha - np.linalg.pinv(Jr) @ r
        return w, float(np.max(np.abs(r))), alpha

    w, res, alpha = polish(alpha)
    if res > LEVEL_TOL:
        raise ValueError(
            f"control subset does not meet the momentum level set: residual "
            f"{res:.3e} at q={z.q.tolist()}, qdot={z.qdot.tolist()}"
        )
    if spread is not None and len(D) > len(spec.cyclic):
        image = TangentPoint(z.q, w)
        Jr = sys.blocks(image).M[np.ix_(list(spec.cyclic), D)]
        _, sv, vt = np.linalg.svd(Jr)
        rank = int(np.sum(sv > 1e-12 * max(1.0, sv[0] if len(sv) else 1.0)))
        null = vt[rank:].T
        if null.shape[1]:
            w, res, alpha = polish(alpha + null @ spread[:null.shape[1]])
            if res > LEVEL_TOL:
                raise ValueError(
                    f"control subset does not meet the momentum level set: "
                    f"residual {res:.3e} after spread"
                )
    gap = subset.membership_gap(z, w)
    if gap > LEVEL_TOL:
        raise ValueError(
            f"control subset does not meet the momentum level set: the "
            f"solved value violates the bounds by {gap:.3e}"
        )
    return w


def _certify_control_level(red: ReducedSystem, samples: int, seed: int) -> None:
    rng = np.random.default_rng(seed)
    for _ in range(samples):
        x = red.space.sample(rng)
        z = red.spec.act(red.spec.sample_group(rng), red.section(x))
        _level_control_value(red.sys, red.spec, red.rcl.control, red.mu, z)


def _attach_reduced_maps(red: ReducedSystem, warn: bool = True) -> None:
    rcl = red.rcl
    if rcl.force is not None:
        red.force_red = ReducedFiberMap(red, rcl.force)
    if rcl.control is not None:
        kept = [i for i in rcl.control.actuated if i in red.shape]
        dropped = [i for i in rcl.control.actuated if i in red.cyclic]
        red.dropped_actuated = tuple(red.sys.space.coords[i] for i in dropped)
        if dropped and warn:
            warnings.warn(
                "cyclic-actuated directions "
                f"{red.dropped_actuated} cannot influence the reduced chart "
                "and were dropped",
                stacklevel=3,
            )
        if kept:
            red.control_red = ReducedControlSubset(red, rcl.control, kept)
    if rcl.law is not None:
        red.law_red = ReducedFiberMap(red, rcl.law.map)


def _certify_reduced_law(red: ReducedSystem, samples: int, seed: int,
                         tol: float) -> None:
    if red.law_red is None or red.control_red is None:
        return
    rng = np.random.default_rng(seed)
    worst, witness = 0.0, None
    for _ in range(samples):
        x = red.space.sample(rng)
        gap = red.control_red.membership_gap(x, red.law_red.value(x))
        if gap > worst:
            worst, witness = gap, x
    red.law_certificate = LawCertificate(ok=worst <= tol, max_gap=worst,
                                         witness=witness, samples=samples,
                                         seed=seed, tol=tol)
    if not red.law_certificate.ok:
        raise ValueError(
            f"reduced control law leaves the reduced subset: max gap {worst:.3e}")


def point_reduce(parent: Union[RCLSystem, LagrangianSystem],
                 spec: TranslationSymmetry, mu, section_offsets=None,
                 samples: int = 100, seed: int = 0,
                 tol: float = LEVEL_TOL) -> ReducedSystem:
    """Descend a system to the shape chart at momentum value mu.

    Certifies, by seeded sampling, that the Lagrangian and every declared
    map ignore the cyclic coordinates, that mu is a regular value, that the
    force image stays on the level set, and that the control slice meets
    the level set.  Raises ValueError naming the violated condition.
    """
    rcl = _as_rcl(parent)
    sys = rcl.sys
    if spec.space is not sys.space:
        raise ValueError("symmetry is declared on a different configuration space")
    extra = {}
    if rcl.force is not None:
        extra["force"] = rcl.force.value
    if rcl.control is not None and rcl.control.offset_map is not None:
        extra["control offset"] = rcl.control.offset_map.value
    if rcl.law is not None:
        extra["law"] = rcl.law.map.value
    inv = check_invariance(spec, sys, samples=samples, seed=seed, tol=tol,
                           extra_maps=extra)
    if not inv.ok:
        w = inv.witness
        raise ValueError(
            f"parent is not invariant under the declared translations: max "
            f"gap {inv.max_discrepancy:.3e} at q={w.q.tolist()}, "
            f"qdot={w.qdot.tolist()}"
        )
    rv = check_regular_value(spec, sys, samples=samples, seed=seed)
    if not rv.ok:
        raise ValueError(
            f"momentum value is not regular: cyclic mass rows have smallest "
            f"singular value {rv.min_singular_value:.3e}"
        )
    red = ReducedSystem(rcl, spec, mu, offsets=section_offsets)
    red.invariance = inv
    red.regular_value = rv
    if rcl.force is not None:
        _certify_force_level(red, samples, seed, tol)
    if rcl.control is not None:
        _certify_control_level(red, samples, seed)
    _attach_reduced_maps(red)
    _certify_reduced_law(red, samples, seed, tol)
    return red


def orbit_reduce(parent: Union[RCLSystem, LagrangianSystem],
                 spec: TranslationSymmetry, mu, algebra: Optional[LieAlgebra] = None,
                 **kwargs) -> ReducedSystem:
    """Reduction over the full momentum orbit.

    Translation groups are abelian, so the orbit through mu is the single
    point mu, the orbit-form correction vanishes identically, and the
    construction coincides with point reduction; the returned system
    carries a certificate recording the computed correction bound.
    Non-abelian algebras are rejected.
    """
    algebra = algebra if algebra is not None else LieAlgebra.abelian(spec.k)
    if algebra.d != spec.k:
        raise ValueError(
            f"algebra dimension {algebra.d} does not match the {spec.k} "
            "declared cyclic coordinates"
        )
    if float(np.max(np.abs(algebra.C))) > 0.0:
        raise ValueError("non-abelian orbit reduction unsupported")
    red = point_reduce(parent, spec, mu, **kwargs)
    basis = np.eye(algebra.d)
    corr = 0.0
    for i in range(algebra.d):
        for j in range(algebra.d):
            corr = max(corr, abs(coadjoint_plus_form(algebra, red.mu,
                                                     basis[i], basis[j])))
    red.orbit_certificate = OrbitCertificate(
        abelian=True, correction_max=corr,
        note="orbit-form correction is identically zero; orbit and point "
             "reductions coincide",
    )
    return red


# -- checks -----------------------------------------------------------------


def check_commutation(red: ReducedSystem, samples: int = 200, seed: int = 0,
                      tol: float = DEFAULT_CHECK_TOL) -> SampledReport:
    """Projecting the parent field equals the reduced field at level points.

    Samples reduced states, lifts them through the section, randomizes the
    cyclic positions by the group action, and compares the shape rows of
    the parent (controlled) field with the reduced field.
    """
    rng = np.random.default_rng(seed)
    up = controlled_field(red.rcl)
    down = reduced_field(red)
    worst, witness = 0.0, None
    d_dq = d_acc = 0.0
    for _ in range(samples):
        x = red.space.sample(rng)
        z = red.spec.act(red.spec.sample_group(rng), red.section(x))
        xr = red.project(z)
        a = down(xr)
        b = up(z)
        gap_q = float(np.max(np.abs(a.dq - b.dq[red.shape])))
        gap_v = float(np.max(np.abs(a.dqdot - b.dqdot[red.shape])))
        d_dq = max(d_dq, gap_q)
        d_acc = max(d_acc, gap_v)
        if max(gap_q, gap_v) > worst:
            worst, witness = max(gap_q, gap_v), x
    return SampledReport(ok=worst <= tol, max_discrepancy=worst, witness=witness,
                         tol=tol, samples=samples,
                         detail={"dq": d_dq, "dqdot": d_acc})


def check_section_independence(red: ReducedSystem, samples: int = 50,
                               seed: int = 0, tol: float = 1e-9,
                               offset_shift: float = 0.7) -> SampledReport:
    """Nothing descended depends on where the section pins the cyclic slots.

    Compares reduced Lagrangian values, energies, two-forms and fields
    against a section with shifted offsets, and additionally recomputes the
    two-form with randomly sheared lifts of the reduced tangent vectors.
    """
    rng = np.random.default_rng(seed)
    other = red.with_section_offsets(red.offsets + offset_shift)
    f1 = reduced_field(red)
    f2 = reduced_field(other)
    m = red.space.n
    worst, witness = 0.0, None
    detail = {"l": 0.0, "E": 0.0, "two_form": 0.0, "field": 0.0, "sheared": 0.0}

    def bump(key: str, gap: float, x: TangentPoint) -> None:
        nonlocal worst, witness
        detail[key] = max(detail[key], gap)
        if gap > worst:
            worst, witness = gap, x

    for _ in range(samples):
        x = red.space.sample(rng)
        bump("l", abs(red.lagrangian_value(x) - other.lagrangian_value(x)), x)
        A1, E1 = red.action_energy(x)
        A2, E2 = other.action_energy(x)
        bump("E", max(abs(A1 - A2), abs(E1 - E2)), x)
        frame = red.frame(x)
        omega = reduced_two_form(red, x, frame=frame)
        omega2 = reduced_two_form(other, x)
        bump("two_form", float(np.max(np.abs(omega.matrix - omega2.matrix))), x)
        a, b = f1(x), f2(x)
        bump("field", float(np.max(np.abs(a.as_vector() - b.as_vector()))), x)
        shear = red.shear_basis(x) @ rng.uniform(-1.0, 1.0, (red.k, 2 * m))
        full = lagrangian_two_form(red.sys, frame.z)
        sheared = pullback_form(frame.J_section + shear, full, base=x,
                                symplectic=False)
        bump("sheared", float(np.max(np.abs(sheared.matrix - omega.matrix))), x)
    return SampledReport(ok=worst <= tol, max_discrepancy=worst, witness=witness,
                         tol=tol, samples=samples, detail=detail)


def check_reduced_legendre(red: ReducedSystem, samples: int = 100, seed: int = 0,
                           tol: float = DEFAULT_CHECK_TOL) -> SampledReport:
    """The reduced fiber derivative intertwines the reduced forms.

    Pulling the canonical shape-chart form back through x -> (q_s, p_s)
    reproduces the reduced two-form, and the momentum-side projection of
    the parent fiber derivative commutes with the reduction.  The orbit
    variant adds a correction built from the algebra bracket, which is
    identically zero here (abelian); its computed bound is reported so the
    orbit and point statements can be seen to coincide.
    """
    rng = np.random.default_rng(seed)
    sys = red.sys
    m = red.space.n
    eye = np.eye(m)
    zero = np.zeros((m, m))
    omega0 = np.block([[zero, eye], [-eye, zero]])
    algebra = LieAlgebra.abelian(red.k)
    basis = np.eye(red.k)
    corr = 0.0
    for i in range(red.k):
        for j in range(red.k):
            corr = max(corr, abs(coadjoint_plus_form(algebra, red.mu,
                                                     basis[i], basis[j])))
    worst, witness = 0.0, None
    detail = {"pullback": 0.0, "diagram": 0.0,
              "orbit_correction": corr, "orbit_point_gap": 0.0}
    for _ in range(samples):
        x = red.space.sample(rng)
        frame = red.frame(x)
        b = frame.blocks
        P = (np.hstack([b.B, b.M]) @ frame.J_section)[red.shape]
        Jfl = np.vstack([np.hstack([eye, zero]), P])
        pulled = Jfl.T @ omega0 @ Jfl
        pulled = 0.5 * (pulled - pulled.T)
        omega = reduced_two_form(red, x, frame=frame)
        gap = float(np.max(np.abs(pulled - omega.matrix)))
        detail["pullback"] = max(detail["pullback"], gap)
        if gap > worst:
            worst, witness = gap, x
        # the orbit statement adds the (zero) correction to the same matrix
        detail["orbit_point_gap"] = max(detail["orbit_point_gap"], corr)
        z = red.spec.act(red.spec.sample_group(rng), frame.z)
        x2 = red.project(z)
        alpha = legendre_transform(sys, z)
        p_red = sys.blocks(red.section(x2)).p[red.shape]
        gap2 = float(np.max(np.abs(p_red - alpha.p[red.shape])))
        gap2 = max(gap2, float(np.max(np.abs(
            red.space.coord_delta(x2.q, alpha.q[red.shape])))))
        detail["diagram"] = max(detail["diagram"], gap2)
        if gap2 > worst:
            worst, witness = gap2, x
    worst = max(worst, corr)
    return SampledReport(ok=worst <= tol, max_discrepancy=worst, witness=witness,
                         tol=tol, samples=samples, detail=detail)


# -- Routhian emission -------------------------------------------------------


def routhian_expression(red: ReducedSystem):
    """Shape-chart Lagrangian from symbolic cyclic-velocity elimination.

    Subtracts mu times the cyclic velocity from L and substitutes the
    solved velocity.  The conjugate momentum must be affine in the cyclic
    velocity with a velocity-free coefficient (true of kinetic-energy
    Lagrangians); exactly one cyclic coordinate is supported.
    """
    if red.k != 1:
        raise ValueError("Routhian emission supports exactly one cyclic coordinate")
    c = red.cyclic[0]
    name_c = red.sys.space.coords[c]
    vel_c = name_c + VELOCITY_SUFFIX
    L = red.sys.lagrangian
    p_c = differentiate(L, vel_c)
    mass = differentiate(p_c, vel_c)
    velocities = set(red.sys.symbols.velocities)
    if free_names(mass) & velocities:
        raise ValueError("cyclic momentum is not affine in the cyclic velocity")
    rest = substitute(p_c, {vel_c: Num(0.0)})
    solved = BinOp("/", BinOp("-", Num(float(red.mu[0])), rest), mass)
    base = BinOp("-", L, BinOp("*", Num(float(red.mu[0])), Var(vel_c)))
    out = substitute(base, {vel_c: solved, name_c: Num(float(red.offsets[0]))})
    return fold_constants(out)


def routhian_system(red: ReducedSystem) -> LagrangianSystem:
    """Independent reduced model built from the Routhian expression."""
    return LagrangianSystem(red.space, routhian_expression(red),
                            params=red.sys.params, tolerances=red.sys.tol)


# -- equivalence of reducible controlled systems -----------------------------


@dataclass(frozen=True)
class ReducibleSystem:
    """A controlled system bundled with its symmetry and momentum value."""

    rcl: RCLSystem
    spec: TranslationSymmetry
    mu: np.ndarray

    def __post_init__(self):
        rcl = _as_rcl(self.rcl)
        object.__setattr__(self, "rcl", rcl)
        mu = np.asarray(self.mu, dtype=float).reshape(-1)
        if mu.shape != (self.spec.k,):
            raise ValueError(f"momentum value must have {self.spec.k} components")
        object.__setattr__(self, "mu", mu)

    @property
    def sys(self) -> LagrangianSystem:
        return self.rcl.sys


@dataclass(frozen=True)
class ReducibleEquivalenceReport:
    """Outcome of the level-set matching conditions for a reducible pair."""

    ok: bool
    kind: str
    mode: str
    conditions: Tuple[ConditionReport, ...]
    samples: int
    seed: int
    tol: float

    def as_dict(self) -> dict:
        return {
            "pass": self.ok,
            "kind": self.kind,
            "mode": self.mode,
            "samples": self.samples,
            "seed": self.seed,
            "tol": self.tol,
            "conditions": [c.as_dict() for c in self.conditions],
        }


def _pull_back(pmap: PointMap, v: TangentPoint) -> TangentPoint:
    y = pmap.inverse_apply(v.q)
    return TangentPoint(y, pmap.inverse_jacobian(v.q) @ v.qdot)


def _level_samples(red: ReducedSystem, rng: np.random.Generator, count: int):
    for _ in range(count):
        x = red.space.sample(rng)
        yield red.spec.act(red.spec.sample_group(rng), red.section(x))


def check_rpcl_equivalence(a: ReducibleSystem, b: ReducibleSystem,
                           pmap: PointMap, samples: int = 100, seed: int = 0,
                           tol: float = DEFAULT_CHECK_TOL,
                           _extra: Tuple[ConditionReport, ...] = (),
                           _kind: str = "rpcl") -> ReducibleEquivalenceReport:
    """Momentum-compatible matching of two reducible controlled systems.

    Checks, on seeded samples of the two momentum level sets: the lifted
    map carries one level set onto the other; it commutes with the two
    translation actions; admissible level-set control values map into the
    other system's slice (both directions); and the controlled fields are
    related.  Field matching uses the other system's declared law when
    present ("direct"), otherwise solves for a realizing control
    ("solvable").
    """
    if pmap.inverse_exprs is None:
        raise ValueError("equivalence checks need an invertible map: supply inverse expressions")
    red_a = point_reduce(a.rcl, a.spec, a.mu, samples=samples, seed=seed)
    red_b = point_reduce(b.rcl, b.spec, b.mu, samples=samples, seed=seed)
    if a.spec.k != b.spec.k:
        raise ValueError("the two symmetries have different numbers of cyclic coordinates")
    rng = np.random.default_rng(seed)
    space_b = b.sys.space
    cyc_b = list(b.spec.cyclic)

    # level-set mapping, both directions
    worst, witness = 0.0, None
    for z in _level_samples(red_a, rng, samples):
        w = tangent_lift(pmap, z)
        r = float(np.max(np.abs(momentum_map_lagrangian(b.spec, b.sys, w) - b.mu)))
        if r > worst:
            worst, witness = r, z
    for z in _level_samples(red_b, rng, samples):
        w = _pull_back(pmap, z)
        r = float(np.max(np.abs(momentum_map_lagrangian(a.spec, a.sys, w) - a.mu)))
        if r > worst:
            worst, witness = r, z
    level = ConditionReport(condition="level-sets", ok=worst <= tol,
                            max_residual=worst, witness=witness)

    # equivariance: the image of a group shift is a group shift
    worst, witness = 0.0, None
    for _ in range(samples):
        g = a.spec.sample_group(rng)
        x1, x2 = red_a.space.sample(rng), red_a.space.sample(rng)
        deltas = []
        for x in (x1, x2):
            z = red_a.spec.act(red_a.spec.sample_group(rng), red_a.section(x))
            w = tangent_lift(pmap, z)
            w_shift = tangent_lift(pmap, a.spec.act(g, z))
            dq = space_b.coord_delta(w_shift.q, w.q)
            off = np.delete(dq, cyc_b)
            r = max(float(np.max(np.abs(off))) if off.size else 0.0,
                    float(np.max(np.abs(w_shift.qdot - w.qdot))))
            if r > worst:
                worst, witness = r, z
            deltas.append(dq[cyc_b])
        r = float(np.max(np.abs(deltas[0] - deltas[1])))
        if r > worst:
            worst, witness = r, x1
    equivariance = ConditionReport(condition="equivariance", ok=worst <= tol,
                                   max_residual=worst, witness=witness)

    # control slices restricted to the level sets, both directions
    ctrl_a, ctrl_b = a.rcl.control, b.rcl.control
    if ctrl_a is None and ctrl_b is None:
        control = ConditionReport(condition="control-subsets", ok=True,
                                  max_residual=0.0, witness=None,
                                  detail="no control subsets declared")
    elif ctrl_a is None or ctrl_b is None:
        control = ConditionReport(condition="control-subsets", ok=False,
                                  max_residual=float("inf"), witness=None,
                                  detail="control subset declared on one side only")
    else:
        worst, witness = 0.0, None
        for z in _level_samples(red_a, rng, samples):
            spread = rng.uniform(-1.0, 1.0, ctrl_a.dim)
            w = _level_control_value(a.sys, a.spec, ctrl_a, a.mu, z, spread=spread)
            v2 = tangent_lift(pmap, z)
            w2 = pmap.jacobian(z.q) @ w
            r = max(ctrl_b.membership_gap(v2, w2),
                    float(np.max(np.abs(momentum_map_lagrangian(
                        b.spec, b.sys, TangentPoint(v2.q, w2)) - b.mu))))
            if r > worst:
                worst, witness = r, z
        for z in _level_samples(red_b, rng, samples):
            spread = rng.uniform(-1.0, 1.0, ctrl_b.dim)
            w = _level_control_value(b.sys, b.spec, ctrl_b, b.mu, z, spread=spread)
            v1 = _pull_back(pmap, z)
            w1 = pmap.inverse_jacobian(z.q) @ w
            r = max(ctrl_a.membership_gap(v1, w1),
                    float(np.max(np.abs(momentum_map_lagrangian(
                        a.spec, a.sys, TangentPoint(v1.q, w1)) - a.mu))))
            if r > worst:
                worst, witness = r, z
        control = ConditionReport(condition="control-subsets", ok=worst <= tol,
                                  max_residual=worst, witness=witness)

    # field matching on the level set
    mode = "direct" if b.rcl.law is not None else "solvable"
    worst, witness = 0.0, None
    ok_fields = True
    if mode == "direct":
        fa = controlled_field(a.rcl)
        fb = controlled_field(b.rcl)
        for z in _level_samples(red_a, rng, samples):
            lifted = tangent_lift_jacobian(pmap, z) @ fa(z).as_vector()
            out = fb(tangent_lift(pmap, z)).as_vector()
            r = float(np.max(np.abs(out - lifted)))
            if r > worst:
                worst, witness = r, z
        ok_fields = worst <= tol
    else:
        for z in _level_samples(red_a, rng, samples):
            result = control_match_solve(a.rcl, b.rcl, pmap, z, tol=tol)
            r = max(result.vertical_gap, result.support_gap)
            if r > worst:
                worst, witness = r, z
            if not result.realizable:
                ok_fields = False
        ok_fields = ok_fields and worst <= tol
    fields = ConditionReport(condition="fields", ok=ok_fields,
                             max_residual=worst, witness=witness)

    conditions = (level, equivariance, control, fields) + _extra
    return ReducibleEquivalenceReport(
        ok=all(c.ok for c in conditions), kind=_kind, mode=mode,
        conditions=conditions, samples=samples, seed=seed, tol=tol,
    )


def check_rocl_equivalence(a: ReducibleSystem, b: ReducibleSystem,
                           pmap: PointMap, algebra_a: Optional[LieAlgebra] = None,
                           algebra_b: Optional[LieAlgebra] = None,
                           samples: int = 100, seed: int = 0,
                           tol: float = DEFAULT_CHECK_TOL) -> ReducibleEquivalenceReport:
    """Orbit-level matching: the momentum conditions plus form agreement.

    For translation symmetries the momentum orbits are points and the
    orbit correction forms vanish on both sides, so the extra condition
    compares two identically-zero forms; it is still evaluated from the
    algebra brackets rather than assumed.
    """
    algebra_a = algebra_a if algebra_a is not None else LieAlgebra.abelian(a.spec.k)
    algebra_b = algebra_b if algebra_b is not None else LieAlgebra.abelian(b.spec.k)
    for alg in (algebra_a, algebra_b):
        if float(np.max(np.abs(alg.C))) > 0.0:
            raise ValueError("non-abelian orbit reduction unsupported")
    worst = 0.0
    basis_a = np.eye(algebra_a.d)
    basis_b = np.eye(algebra_b.d)
    for i in range(min(algebra_a.d, algebra_b.d)):
        for j in range(min(algebra_a.d, algebra_b.d)):
            fa = coadjoint_plus_form(algebra_a, a.mu, basis_a[i], basis_a[j])
            fb = coadjoint_plus_form(algebra_b, b.mu, basis_b[i], basis_b[j])
            worst = max(worst, abs(fa - fb))
    correction = ConditionReport(condition="correction-form", ok=worst <= tol,
                                 max_residual=worst, witness=None,
                                 detail="both orbit correction forms are zero (abelian)")
    return check_rpcl_equivalence(a, b, pmap, samples=samples, seed=seed,
                                  tol=tol, _extra=(correction,), _kind="rocl")


# -- upstairs/downstairs harness ---------------------------------------------


@dataclass(frozen=True)
class HarnessEntry:
    name: str
    upstairs_ok: bool
    upstairs_residual: float
    downstairs_ok: bool
    downstairs_residual: float

    @property
    def agree(self) -> bool:
        return self.upstairs_ok == self.downstairs_ok

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "upstairs_pass": self.upstairs_ok,
            "upstairs_max_residual": self.upstairs_residual,
            "downstairs_pass": self.downstairs_ok,
            "downstairs_max_residual": self.downstairs_residual,
            "agree": self.agree,
        }


@dataclass(frozen=True)
class HarnessReport:
    """Verdict agreement between full-space and reduced-space checks."""

    ok: bool
    kind: str
    entries: Tuple[HarnessEntry, ...]
    samples: int
    seed: int
    tol: float

    def as_dict(self) -> dict:
        return {
            "pass": self.ok,
            "kind": self.kind,
            "samples": self.samples,
            "seed": self.seed,
            "tol": self.tol,
            "entries": [e.as_dict() for e in self.entries],
        }


def _report_max_residual(report: ReducibleEquivalenceReport) -> float:
    finite = [c.max_residual for c in report.conditions if np.isfinite(c.max_residual)]
    return max(finite) if finite else float("inf")


def _plain_upstairs(a: ReducibleSystem, b: ReducibleSystem, pmap: PointMap,
                    samples: int, seed: int) -> float:
    """Form pullback plus field relatedness residual for plain systems."""
    rng = np.random.default_rng(seed)
    fa = euler_lagrange_field(a.sys)
    fb = euler_lagrange_field(b.sys)
    worst = 0.0
    for _ in range(samples):
        v = a.sys.space.sample(rng)
        w = tangent_lift(pmap, v)
        J = tangent_lift_jacobian(pmap, v)
        pulled = J.T @ lagrangian_two_form(b.sys, w).matrix @ J
        pulled = 0.5 * (pulled - pulled.T)
        worst = max(worst, float(np.max(np.abs(
            pulled - lagrangian_two_form(a.sys, v).matrix))))
        worst = max(worst, float(np.max(np.abs(
            fb(w).as_vector() - J @ fa(v).as_vector()))))
    return worst


def _reduced_downstairs(red_a: ReducedSystem, red_b: ReducedSystem,
                        pmap: PointMap, controlled: bool, samples: int,
                        seed: int, tol: float) -> float:
    """Residual of the descended map relating the two reduced systems."""
    rng = np.random.default_rng(seed)
    fa = reduced_field(red_a)
    fb = reduced_field(red_b)
    m = red_a.space.n
    sel_b = np.zeros((2 * m, 2 * red_b.sys.n))
    for row, i in enumerate(red_b.shape):
        sel_b[row, i] = 1.0
        sel_b[m + row, red_b.sys.n + i] = 1.0
    worst = 0.0
    for _ in range(samples):
        x = red_a.space.sample(rng)
        z = red_a.section(x)
        w = tangent_lift(pmap, z)
        x2 = red_b.project(w)
        chain = sel_b @ tangent_lift_jacobian(pmap, z) @ red_a.section_jacobian(x)
        worst = max(worst, float(np.max(np.abs(
            fb(x2).as_vector() - chain @ fa(x).as_vector()))))
        if controlled:
            if (red_a.control_red is None) != (red_b.control_red is None):
                worst = max(worst, float("inf"))
            elif red_a.control_red is not None:
                base = chain[:m, :m]
                wc = red_a.control_red.sample_member(x, rng)
                gap = red_b.control_red.membership_gap(x2, base @ wc)
                wc2 = red_b.control_red.sample_member(x2, rng)
                gap2 = red_a.control_red.membership_gap(
                    x, np.linalg.solve(base, wc2))
                worst = max(worst, gap, gap2)
        else:
            pulled = chain.T @ reduced_two_form(red_b, x2).matrix @ chain
            pulled = 0.5 * (pulled - pulled.T)
            worst = max(worst, float(np.max(np.abs(
                pulled - reduced_two_form(red_a, x).matrix))))
    return worst


def theorem_harness(kind: str, pairs: Sequence, samples: int = 60,
                    seed: int = 0, tol: float = DEFAULT_CHECK_TOL) -> HarnessReport:
    """Certify that full-space verdicts match reduced-space verdicts.

    kind selects the statement being exercised: "controlled-point" and
    "controlled-orbit" compare the momentum-compatible controlled matching
    upstairs against relatedness of the reduced controlled systems;
    "lagrangian-point" and "lagrangian-orbit" compare form pullback plus
    field relatedness upstairs against their reduced counterparts.  Each
    pair is (name, a, b, map) with a and b ReducibleSystem bundles.  The
    report passes when every pair's two verdicts agree; entries record the
    residuals so disagreements can be diagnosed.
    """
    if kind not in HARNESS_KINDS:
        raise ValueError(f"unknown harness kind {kind!r}; expected one of {HARNESS_KINDS}")
    controlled = kind.startswith("controlled")
    orbit = kind.endswith("orbit")
    reduce_fn = orbit_reduce if orbit else point_reduce
    entries: List[HarnessEntry] = []
    for name, a, b, pmap in pairs:
        if controlled:
            checker = check_rocl_equivalence if orbit else check_rpcl_equivalence
            rep = checker(a, b, pmap, samples=samples, seed=seed, tol=tol)
            up_ok, up_res = rep.ok, _report_max_residual(rep)
        else:
            up_res = _plain_upstairs(a, b, pmap, samples, seed)
            up_ok = up_res <= tol
        red_a = reduce_fn(a.rcl, a.spec, a.mu, samples=samples, seed=seed)
        red_b = reduce_fn(b.rcl, b.spec, b.mu, samples=samples, seed=seed)
        down_res = _reduced_downstairs(red_a, red_b, pmap, controlled,
                                       samples, seed, tol)
        entries.append(HarnessEntry(
            name=name, upstairs_ok=up_ok, upstairs_residual=up_res,
            downstairs_ok=down_res <= tol, downstairs_residual=down_res,
        ))
    return HarnessReport(ok=all(e.agree for e in entries), kind=kind,
                         entries=tuple(entries), samples=samples, seed=seed,
                         tol=tol)

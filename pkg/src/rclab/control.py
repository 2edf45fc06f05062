"""Forces, control subsets and laws, and controlled dynamics.

Everything here works in the chart-flat splitting of T(TQ): a vertical
vector is a pure dqdot component and fiber transport along straight lines
is the identity on components.  Control subsets are affine slices
(anchor + actuated directions + box bounds), so membership is decidable.
Equivalence verdicts are seeded sample certificates over the declared
boxes, never claims of global equality.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .expr import parse, to_source, free_names, compile_tape
from .expr.ast import Expr, Num, Var, VELOCITY_SUFFIX
from .expr.deriv import differentiate, substitute, _add, _mul
from .geometry import (
    ConfigSpace,
    DoubleTangentVector,
    PointMap,
    TangentPoint,
    double_tangent_lift,
    tangent_lift,
)
from .lagrangian import LagrangianSystem
from .dynamics import VectorFieldOnTQ, euler_lagrange_field

DEFAULT_LAW_SAMPLES = 512
DEFAULT_MEMBERSHIP_TOL = 1e-9
DEFAULT_EQUIV_TOL = 1e-8


def _as_expr(e, symbols) -> Expr:
    return parse(e, symbols) if isinstance(e, str) else e


class FiberMap:
    """Base-preserving map (q, qdot) -> (q, f(q, qdot)) given componentwise.

    Only the fiber component is user-specified, so the map cannot move the
    base point.  Components may use coordinates, velocities and parameters.
    """

    def __init__(self, space: ConfigSpace, exprs: Sequence, params: Optional[Dict[str, float]] = None):
        self.space = space
        self.params = dict(params or {})
        self.symbols = space.symbol_table(tuple(self.params.keys()))
        parsed = tuple(_as_expr(e, self.symbols) for e in exprs)
        if len(parsed) != space.n:
            raise ValueError(f"need {space.n} fiber components, got {len(parsed)}")
        known = set(self.symbols.actives) | set(self.symbols.params)
        for e in parsed:
            unknown = free_names(e) - known
            if unknown:
                raise ValueError(f"fiber component uses unknown names {sorted(unknown)}")
        self.exprs: Tuple[Expr, ...] = parsed
        self._tapes = tuple(compile_tape(e, self.symbols) for e in parsed)
        self.param_values = np.array(list(self.params.values()), dtype=float)

    @classmethod
    def for_system(cls, sys: LagrangianSystem, exprs: Sequence) -> "FiberMap":
        return cls(sys.space, exprs, sys.params)

    @property
    def n(self) -> int:
        return self.space.n

    def value(self, v: TangentPoint) -> np.ndarray:
        x = v.as_array()
        return np.array([t.value(x, self.param_values) for t in self._tapes])

    def jacobians(self, v: TangentPoint) -> Tuple[np.ndarray, np.ndarray]:
        """(df/dq, df/dqdot) at v, each of shape (n, n)."""
        n = self.n
        x = v.as_array()
        Jq = np.zeros((n, n))
        Jv = np.zeros((n, n))
        for i, t in enumerate(self._tapes):
            _, g = t.value_grad(x, self.param_values)
            Jq[i] = g[:n]
            Jv[i] = g[n:]
        return Jq, Jv

    def directional(self, v: TangentPoint, dq: np.ndarray, dqdot: np.ndarray) -> np.ndarray:
        """Derivative of f along (dq, dqdot) at v."""
        Jq, Jv = self.jacobians(v)
        return Jq @ dq + Jv @ dqdot

    def sources(self) -> Tuple[str, ...]:
        return tuple(to_source(e) for e in self.exprs)


class ControlSubset:
    """Affine slice of admissible fiber values over each state.

    A value w is admissible at v exactly when w - c0(v) is supported on the
    actuated directions and each actuated component lies inside its bounds.
    """

    def __init__(self, space: ConfigSpace, actuated: Sequence, offset: Optional[Sequence] = None,
                 bounds: Optional[Sequence] = None, params: Optional[Dict[str, float]] = None):
        self.space = space
        idx = []
        for a in actuated:
            i = space.coords.index(a) if isinstance(a, str) else int(a)
            if not 0 <= i < space.n:
                raise ValueError(f"actuated index {i} out of range")
            idx.append(i)
        if not idx:
            raise ValueError("a declared control subset needs at least one actuated direction")
        if len(set(idx)) != len(idx):
            raise ValueError("actuated directions must be distinct")
        self.actuated: Tuple[int, ...] = tuple(sorted(idx))
        self.actuated_names = tuple(space.coords[i] for i in self.actuated)
        self._free = tuple(i for i in range(space.n) if i not in self.actuated)
        self.offset_map = FiberMap(space, offset, params) if offset is not None else None
        k = len(self.actuated)
        lo = np.full(k, -np.inf)
        hi = np.full(k, np.inf)
        if bounds is not None:
            if len(bounds) != k:
                raise ValueError("need one (lo, hi) pair per actuated direction")
            for j, pair in enumerate(bounds):
                a, b = pair
                lo[j] = -np.inf if a is None else float(a)
                hi[j] = np.inf if b is None else float(b)
                if lo[j] > hi[j]:
                    raise ValueError(f"empty bound interval for actuated direction {j}")
        self.lo = lo
        self.hi = hi

    @property
    def dim(self) -> int:
        return len(self.actuated)

    def offset(self, v: TangentPoint) -> np.ndarray:
        if self.offset_map is None:
            return np.zeros(self.space.n)
        return self.offset_map.value(v)

    def membership_gap(self, v: TangentPoint, w) -> float:
        """Distance of w from the slice at v (0 when inside)."""
        d = np.asarray(w, float) - self.offset(v)
        return self._gap(d)

    def direction_gap(self, w) -> float:
        """Distance of a raw fiber vector from the actuated subspace/bounds."""
        return self._gap(np.asarray(w, float))

    def _gap(self, d: np.ndarray) -> float:
        off = float(np.max(np.abs(d[list(self._free)]))) if self._free else 0.0
        da = d[list(self.actuated)]
        excess = np.maximum(self.lo - da, 0.0) + np.maximum(da - self.hi, 0.0)
        return max(off, float(np.max(excess)) if len(excess) else 0.0)

    def member(self, v: TangentPoint, w, tol: float = DEFAULT_MEMBERSHIP_TOL) -> bool:
        return self.membership_gap(v, w) <= tol

    def sample_member(self, v: TangentPoint, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
        """One admissible fiber value at v, uniform over clipped bounds."""
        w = self.offset(v)
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


@dataclass(frozen=True)
class LawCertificate:
    ok: bool
    max_gap: float
    witness: Optional[TangentPoint]
    samples: int
    seed: int
    tol: float


class ControlLaw:
    """Feedback law: a fiber map whose values are certified to lie in the subset."""

    def __init__(self, space: ConfigSpace, fiber_map: FiberMap, subset: ControlSubset,
                 samples: int = DEFAULT_LAW_SAMPLES, seed: int = 0,
                 tol: float = DEFAULT_MEMBERSHIP_TOL):
        self.map = fiber_map
        self.subset = subset
        rng = np.random.default_rng(seed)
        worst = 0.0
        witness = None
        for _ in range(samples):
            v = space.sample(rng)
            gap = subset.membership_gap(v, fiber_map.value(v))
            if gap > worst:
                worst, witness = gap, v
        self.certificate = LawCertificate(ok=worst <= tol, max_gap=worst, witness=witness,
                                          samples=samples, seed=seed, tol=tol)


class RCLSystem:
    """A Lagrangian system with optional force map, control subset and law."""

    def __init__(self, sys: LagrangianSystem, force: Optional[FiberMap] = None,
                 control: Optional[ControlSubset] = None, law: Optional[ControlLaw] = None):
        if force is not None and force.n != sys.n:
            raise ValueError("force map dimension does not match the system")
        if control is not None and control.space.n != sys.n:
            raise ValueError("control subset dimension does not match the system")
        if law is not None:
            if control is None:
                raise ValueError("a control law needs a declared control subset")
            if law.subset is not control:
                raise ValueError("law was certified against a different control subset")
            if not law.certificate.ok:
                raise ValueError(
                    f"control law violates its subset: gap {law.certificate.max_gap:.3e} "
                    f"at {law.certificate.witness}")
        self.sys = sys
        self.force = force
        self.control = control
        self.law = law

    @property
    def space(self) -> ConfigSpace:
        return self.sys.space

    @property
    def n(self) -> int:
        return self.sys.n


def vertical_lift(at: TangentPoint, w) -> DoubleTangentVector:
    """Lift of a fiber vector: pure dqdot component in the chart-flat split."""
    w = np.asarray(w, dtype=float).reshape(-1)
    return DoubleTangentVector(at, np.zeros(len(at.q)), w)


def vlift_of_fiber_map(fmap: FiberMap, field: VectorFieldOnTQ, at: TangentPoint) -> DoubleTangentVector:
    """Vertical part of Tf applied to the field, transported back to at.

    Transport along the straight fiber line is the identity on components,
    so the result is (base=at, dq=0, dqdot = (df/dq) xi.dq + (df/dqdot) xi.dqdot).
    """
    xi = field(at)
    return DoubleTangentVector(at, np.zeros(fmap.n), fmap.directional(at, xi.dq, xi.dqdot))


def controlled_field(rcl: RCLSystem) -> VectorFieldOnTQ:
    """xi = xi_L + vlift(F) xi_L + vlift(u) xi_L; second order by construction.

    An absent force or law simply drops its term.
    """
    base_field = euler_lagrange_field(rcl.sys)
    maps = [m for m in (rcl.force, rcl.law.map if rcl.law is not None else None) if m is not None]

    def ev(v: TangentPoint) -> DoubleTangentVector:
        xi = base_field(v)
        dqdot = np.array(xi.dqdot, dtype=float)
        for fm in maps:
            dqdot += fm.directional(v, xi.dq, xi.dqdot)
        return DoubleTangentVector(v, v.qdot.copy(), dqdot)

    return VectorFieldOnTQ(ev, provenance="controlled-euler-lagrange")


# ---------------------------------------------------------------------------
# Pushforward construction (symbolic, needs the map's declared inverse)

def _require_inverse(pmap: PointMap):
    if pmap.inverse_exprs is None:
        raise ValueError("map must declare an inverse")


def _coordinate_substitution(pmap: PointMap) -> Dict[str, Expr]:
    """x_j -> phi^{-1}_j(y) as expression trees."""
    _require_inverse(pmap)
    return {c: pmap.inverse_exprs[j] for j, c in enumerate(pmap.source.coords)}


def _tangent_substitution(pmap: PointMap) -> Dict[str, Expr]:
    """The substitution realizing (T phi)^{-1}: coordinates and velocities."""
    mapping = dict(_coordinate_substitution(pmap))
    for j, c in enumerate(pmap.source.coords):
        inv = pmap.inverse_exprs[j]
        vel: Optional[Expr] = None
        for y in pmap.target.coords:
            term = _mul(differentiate(inv, y), Var(y + VELOCITY_SUFFIX))
            vel = term if vel is None else _add(vel, term)
        mapping[c + VELOCITY_SUFFIX] = vel if vel is not None else Num(0.0)
    return mapping


def pushforward_lagrangian(pmap: PointMap, sys: LagrangianSystem, certify: bool = True,
                           seed: int = 0) -> LagrangianSystem:
    """L2 = L1 composed with (T phi)^{-1}, built by substitution."""
    expr = substitute(sys.lagrangian, _tangent_substitution(pmap))
    return LagrangianSystem(pmap.target, expr, params=sys.params,
                            tolerances=sys.tol, certify=certify, seed=seed)


def pushforward_fiber_map(pmap: PointMap, fmap: FiberMap) -> FiberMap:
    """T(phi) . f . T(phi)^{-1} as a fiber map on the target chart."""
    _require_inverse(pmap)
    coord_sub = _coordinate_substitution(pmap)
    full_sub = _tangent_substitution(pmap)
    out = []
    for i in range(pmap.target.n):
        acc: Optional[Expr] = None
        for j, c in enumerate(pmap.source.coords):
            A = substitute(differentiate(pmap.exprs[i], c), coord_sub)
            term = _mul(A, substitute(fmap.exprs[j], full_sub))
            acc = term if acc is None else _add(acc, term)
        out.append(acc if acc is not None else Num(0.0))
    return FiberMap(pmap.target, out, fmap.params)


def pushforward_subset(pmap: PointMap, subset: ControlSubset,
                       probes: int = 8, seed: int = 7) -> ControlSubset:
    """Image of an affine slice, when it is again an affine slice.

    The actuated axes must map onto coordinate axes (the Jacobian columns
    over D must share one fixed row support of equal size); finite bounds
    additionally need a constant diagonal scaling on those axes.
    """
    _require_inverse(pmap)
    D = list(subset.actuated)
    rng = np.random.default_rng(seed)
    support: Optional[set] = None
    scales = []
    for _ in range(probes):
        q = rng.uniform(pmap.source.q_box[:, 0], pmap.source.q_box[:, 1])
        J = pmap.jacobian(q)
        cols = J[:, D]
        rows = set(np.nonzero(np.any(np.abs(cols) > 1e-12, axis=1))[0].tolist())
        support = rows if support is None else support | rows
        scales.append(cols)
    assert support is not None
    rows = sorted(support)
    if len(rows) != len(D):
        raise ValueError("actuated directions do not map onto coordinate axes under this map")
    sub = np.array(scales)[:, rows, :]
    if abs(np.linalg.det(sub[0])) < 1e-12:
        raise ValueError("map collapses the actuated directions")

    finite = np.isfinite(subset.lo) | np.isfinite(subset.hi)
    if np.any(finite):
        diag_ok = all(np.allclose(s, np.diag(np.diag(s)), atol=1e-12) for s in sub)
        const_ok = all(np.allclose(s, sub[0], atol=1e-9) for s in sub)
        if not (diag_ok and const_ok):
            raise ValueError("finite control bounds do not push forward through this map")
        bounds = []
        for j in range(len(D)):
            s = sub[0][j, j]
            a, b = sorted((s * subset.lo[j], s * subset.hi[j]))
            bounds.append((None if not np.isfinite(a) else a,
                           None if not np.isfinite(b) else b))
    else:
        bounds = None

    offset = None
    if subset.offset_map is not None:
        offset = pushforward_fiber_map(pmap, subset.offset_map).exprs
    params = subset.offset_map.params if subset.offset_map is not None else None
    return ControlSubset(pmap.target, rows, offset=offset, bounds=bounds, params=params)


def pushforward_rcl(pmap: PointMap, rcl: RCLSystem, certify: bool = True,
                    seed: int = 0) -> RCLSystem:
    """Transport a whole system through the diffeomorphism; the law is re-certified."""
    sys2 = pushforward_lagrangian(pmap, rcl.sys, certify=certify, seed=seed)
    force2 = pushforward_fiber_map(pmap, rcl.force) if rcl.force is not None else None
    control2 = pushforward_subset(pmap, rcl.control) if rcl.control is not None else None
    law2 = None
    if rcl.law is not None:
        assert control2 is not None
        cert = rcl.law.certificate
        law2 = ControlLaw(sys2.space, pushforward_fiber_map(pmap, rcl.law.map), control2,
                          samples=cert.samples, seed=cert.seed, tol=cert.tol)
    return RCLSystem(sys2, force=force2, control=control2, law=law2)


# ---------------------------------------------------------------------------
# Matching and equivalence

class NonVerticalRequirement(RuntimeError):
    """The matching requirement has a dq component: no law can realize it."""

    def __init__(self, gap: float, at: TangentPoint):
        super().__init__(f"matching requirement is not vertical (dq gap {gap:.3e})")
        self.gap = gap
        self.at = at


@dataclass(frozen=True)
class MatchSolveResult:
    correction: np.ndarray
    realizable: bool
    vertical_gap: float
    support_gap: float
    base: TangentPoint


class _MatchContext:
    """Shared state for matching solves over one (a, b, map) triple."""

    def __init__(self, a: RCLSystem, b: RCLSystem, pmap: PointMap):
        _require_inverse(pmap)
        self.a, self.b, self.pmap = a, b, pmap
        self.xi_a = euler_lagrange_field(a.sys)
        self.xi_b = euler_lagrange_field(b.sys)
        self.push_force = pushforward_fiber_map(pmap, a.force) if a.force is not None else None
        self.push_law = pushforward_fiber_map(pmap, a.law.map) if a.law is not None else None

    def solve(self, at: TangentPoint, tol: float) -> MatchSolveResult:
        v2 = tangent_lift(self.pmap, at)
        lifted = double_tangent_lift(self.pmap, self.xi_a(at))
        xi2 = self.xi_b(v2)
        w_dq = lifted.dq - xi2.dq
        w = lifted.dqdot - xi2.dqdot
        if self.b.force is not None:
            w -= self.b.force.directional(v2, xi2.dq, xi2.dqdot)
        if self.push_force is not None:
            w += self.push_force.directional(v2, xi2.dq, xi2.dqdot)
        if self.push_law is not None:
            w += self.push_law.directional(v2, xi2.dq, xi2.dqdot)
        vertical_gap = float(np.max(np.abs(w_dq)))
        if vertical_gap > tol:
            raise NonVerticalRequirement(vertical_gap, at)
        if self.b.control is not None:
            support_gap = self.b.control.direction_gap(w)
        else:
            # No subset on b means no control is available at all: the
            # requirement must vanish outright.
            support_gap = float(np.max(np.abs(w)))
        return MatchSolveResult(correction=w, realizable=support_gap <= tol,
                                vertical_gap=vertical_gap, support_gap=support_gap, base=v2)


def control_match_solve(a: RCLSystem, b: RCLSystem, pmap: PointMap, at: TangentPoint,
                        tol: float = DEFAULT_EQUIV_TOL) -> MatchSolveResult:
    """Required vertical correction for b's law at T(phi)(at), plus realizability.

    Any law already attached to b is deliberately ignored: the solve answers
    what b's law would have to contribute.
    """
    return _MatchContext(a, b, pmap).solve(at, tol)


@dataclass(frozen=True)
class ConditionReport:
    condition: str
    ok: bool
    max_residual: float
    witness: Optional[TangentPoint]
    detail: str = ""

    def as_dict(self) -> dict:
        return {
            "condition": self.condition,
            "pass": self.ok,
            "max_residual": self.max_residual,
            "witness": None if self.witness is None else {
                "q": self.witness.q.tolist(), "qdot": self.witness.qdot.tolist()},
            "detail": self.detail,
        }


@dataclass(frozen=True)
class RCLEquivalenceReport:
    ok: bool
    rcl1: ConditionReport
    rcl2: ConditionReport
    mode: str
    samples: int
    seed: int
    tol: float

    def as_dict(self) -> dict:
        return {
            "pass": self.ok,
            "conditions": [self.rcl1.as_dict(), self.rcl2.as_dict()],
            "mode": self.mode,
            "samples": self.samples,
            "seed": self.seed,
            "tol": self.tol,
        }


def _pull_back_point(pmap: PointMap, v: TangentPoint) -> TangentPoint:
    q1 = pmap.inverse_apply(v.q)
    return TangentPoint(q1, pmap.inverse_jacobian(v.q) @ v.qdot)


def _check_rcl1(a: RCLSystem, b: RCLSystem, pmap: PointMap, samples: int,
                rng: np.random.Generator, tol: float) -> ConditionReport:
    if (a.control is None) != (b.control is None):
        return ConditionReport("RCL-1", False, np.inf, None,
                               "control subset declared on one side only")
    if a.control is None:
        return ConditionReport("RCL-1", True, 0.0, None, "no control subsets declared")
    if a.control.dim != b.control.dim:
        return ConditionReport(
            "RCL-1", False, np.inf, None,
            f"actuated dimensions differ ({a.control.dim} vs {b.control.dim})")
    worst = 0.0
    witness = None
    for _ in range(samples):
        v = a.space.sample(rng)
        w = a.control.sample_member(v, rng)
        v2 = tangent_lift(pmap, v)
        gap = b.control.membership_gap(v2, pmap.jacobian(v.q) @ w)
        if gap > worst:
            worst, witness = gap, v
        vb = b.space.sample(rng)
        wb = b.control.sample_member(vb, rng)
        v1 = _pull_back_point(pmap, vb)
        gap = a.control.membership_gap(v1, pmap.inverse_jacobian(vb.q) @ wb)
        if gap > worst:
            worst, witness = gap, vb
    return ConditionReport("RCL-1", worst <= tol, worst, witness,
                           "sampled membership both directions")


def check_rcl_equivalence(a: RCLSystem, b: RCLSystem, pmap: PointMap,
                          samples: int = 100, seed: int = 0,
                          tol: float = DEFAULT_EQUIV_TOL) -> RCLEquivalenceReport:
    """Sample-certified matching of control subsets and controlled dynamics.

    When b carries a law the fields are compared directly; otherwise each
    sample is checked for a realizable vertical correction (the existential
    reading of the second condition).
    """
    _require_inverse(pmap)
    rng = np.random.default_rng(seed)
    rcl1 = _check_rcl1(a, b, pmap, samples, rng, tol)

    worst = 0.0
    witness = None
    ok = True
    detail = ""
    if b.law is not None:
        mode = "direct"
        field_a = controlled_field(a)
        field_b = controlled_field(b)
        for _ in range(samples):
            v = a.space.sample(rng)
            lifted = double_tangent_lift(pmap, field_a(v))
            xi_b = field_b(lifted.base)
            r = max(float(np.max(np.abs(xi_b.dq - lifted.dq))),
                    float(np.max(np.abs(xi_b.dqdot - lifted.dqdot))))
            if r > worst:
                worst, witness = r, v
        ok = worst <= tol
        detail = "controlled fields compared through T(T(phi))"
    else:
        mode = "solvable"
        ctx = _MatchContext(a, b, pmap)
        for _ in range(samples):
            v = a.space.sample(rng)
            try:
                res = ctx.solve(v, tol)
            except NonVerticalRequirement as err:
                ok = False
                worst, witness = err.gap, v
                detail = "matching requirement not vertical"
                break
            r = max(res.vertical_gap, res.support_gap)
            if r > worst:
                worst, witness = r, v
            if not res.realizable:
                ok = False
        else:
            ok = ok and worst <= tol
            detail = "per-sample realizable vertical correction"
    rcl2 = ConditionReport("RCL-2", ok, worst, witness, detail)
    return RCLEquivalenceReport(ok=rcl1.ok and rcl2.ok, rcl1=rcl1, rcl2=rcl2,
                                mode=mode, samples=samples, seed=seed, tol=tol)


@dataclass(frozen=True)
class LawMatchReport:
    premise_ok: bool
    premise_max: float
    applicable: bool
    ok: Optional[bool]
    max_residual: Optional[float]
    witness: Optional[TangentPoint]
    samples: int
    seed: int
    tol: float

    def as_dict(self) -> dict:
        return {
            "premise_pass": self.premise_ok,
            "premise_max_residual": self.premise_max,
            "applicable": self.applicable,
            "pass": self.ok,
            "max_residual": self.max_residual,
            "witness": None if self.witness is None else {
                "q": self.witness.q.tolist(), "qdot": self.witness.qdot.tolist()},
            "samples": self.samples,
            "seed": self.seed,
            "tol": self.tol,
        }


def check_eq33_condition(a: RCLSystem, b: RCLSystem, pmap: PointMap,
                         samples: int = 100, seed: int = 0,
                         tol: float = DEFAULT_EQUIV_TOL) -> LawMatchReport:
    """Pointwise law-difference identity, gated on plain-field relatedness.

    First verifies the premise that the two uncontrolled fields are related
    by T(T(phi)); when that fails the identity is reported not-applicable.
    Then checks vlift(u2) - vlift(push u1) = -vlift(F2) + vlift(push F1)
    along the target field, all terms vertical by construction.
    """
    _require_inverse(pmap)
    xi_a = euler_lagrange_field(a.sys)
    xi_b = euler_lagrange_field(b.sys)
    push_force = pushforward_fiber_map(pmap, a.force) if a.force is not None else None
    push_law = pushforward_fiber_map(pmap, a.law.map) if a.law is not None else None
    law_b = b.law.map if b.law is not None else None

    rng = np.random.default_rng(seed)
    premise_max = 0.0
    eq_max = 0.0
    premise_witness = None
    eq_witness = None
    for _ in range(samples):
        v = a.space.sample(rng)
        lifted = double_tangent_lift(pmap, xi_a(v))
        xi2 = xi_b(lifted.base)
        r = max(float(np.max(np.abs(xi2.dq - lifted.dq))),
                float(np.max(np.abs(xi2.dqdot - lifted.dqdot))))
        if r > premise_max:
            premise_max, premise_witness = r, v

        n = b.n
        lhs = np.zeros(n)
        rhs = np.zeros(n)
        if law_b is not None:
            lhs += law_b.directional(lifted.base, xi2.dq, xi2.dqdot)
        if push_law is not None:
            lhs -= push_law.directional(lifted.base, xi2.dq, xi2.dqdot)
        if b.force is not None:
            rhs -= b.force.directional(lifted.base, xi2.dq, xi2.dqdot)
        if push_force is not None:
            rhs += push_force.directional(lifted.base, xi2.dq, xi2.dqdot)
        r = float(np.max(np.abs(lhs - rhs)))
        if r > eq_max:
            eq_max, eq_witness = r, v

    premise_ok = premise_max <= tol
    if not premise_ok:
        return LawMatchReport(premise_ok=False, premise_max=premise_max, applicable=False,
                              ok=None, max_residual=None, witness=premise_witness,
                              samples=samples, seed=seed, tol=tol)
    return LawMatchReport(premise_ok=True, premise_max=premise_max, applicable=True,
                          ok=eq_max <= tol, max_residual=eq_max, witness=eq_witness,
                          samples=samples, seed=seed, tol=tol)

"""Chart-level configuration spaces, bundle points, two-forms, and maps.

Everything lives in a single global coordinate chart.  Two-forms are dense
matrices at a point with the pairing convention w(u, v) = u^T W v, and the
canonical form on cotangent charts is Omega0 = [[0, I], [-I, 0]].  That
convention is fixed repo-wide; tests pin it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from .expr import Expr, SymbolTable, compile_tape, free_names, parse

TWO_PI = 2.0 * np.pi

ANTISYM_TOL = 1e-12
SYMPLECTIC_MIN_SV = 1e-10
INVERSE_CHECK_TOL = 1e-10


def _as_box(box, n: int, name: str) -> np.ndarray:
    arr = np.asarray(box, dtype=float)
    if arr.shape == (2,):
        arr = np.tile(arr, (n, 1))
    if arr.shape != (n, 2):
        raise ValueError(f"{name} must have shape ({n}, 2), got {arr.shape}")
    if not np.all(arr[:, 0] < arr[:, 1]):
        raise ValueError(f"{name} must satisfy lower < upper componentwise")
    return arr


class ConfigSpace:
    """Configuration chart: named coordinates, periodic flags, sampling boxes.

    Periodic coordinates have period 2*pi and are wrapped into [0, 2*pi) for
    storage and sampling; Jacobians treat them as ordinary reals.
    """

    def __init__(self, coords: Sequence[str], q_box=(-1.0, 1.0), v_box=(-1.0, 1.0),
                 periodic: Optional[Sequence[bool]] = None):
        self.coords = tuple(coords)
        if len(self.coords) < 1:
            raise ValueError("need at least one coordinate")
        self.n = len(self.coords)
        self.q_box = _as_box(q_box, self.n, "q_box")
        self.v_box = _as_box(v_box, self.n, "v_box")
        self.periodic = tuple(bool(b) for b in (periodic or [False] * self.n))
        if len(self.periodic) != self.n:
            raise ValueError("periodic flags must match the coordinate count")

    def symbol_table(self, params: Sequence[str] = ()) -> SymbolTable:
        return SymbolTable(coords=self.coords, params=tuple(params))

    def wrap(self, q) -> np.ndarray:
        """Wrap periodic components into [0, 2*pi); others pass through."""
        q = np.array(q, dtype=float)
        for i, per in enumerate(self.periodic):
            if per:
                q[i] = np.mod(q[i], TWO_PI)
        return q

    def coord_delta(self, qa, qb) -> np.ndarray:
        """Componentwise qa - qb, periodic components wrapped into (-pi, pi]."""
        d = np.asarray(qa, dtype=float) - np.asarray(qb, dtype=float)
        for i, per in enumerate(self.periodic):
            if per:
                d[i] = np.mod(d[i] + np.pi, TWO_PI) - np.pi
        return d

    def contains_q(self, q) -> bool:
        q = self.wrap(q)
        return bool(np.all(q >= self.q_box[:, 0] - 1e-12) and np.all(q <= self.q_box[:, 1] + 1e-12))

    def sample(self, rng: np.random.Generator) -> "TangentPoint":
        """One uniform tangent point from the q and velocity boxes."""
        q = rng.uniform(self.q_box[:, 0], self.q_box[:, 1])
        qdot = rng.uniform(self.v_box[:, 0], self.v_box[:, 1])
        return TangentPoint(self.wrap(q), qdot)

    def __repr__(self):
        return f"ConfigSpace({self.coords!r})"


def _finite_vector(v, n: int, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=float).reshape(-1)
    if arr.shape != (n,) and n >= 0:
        raise ValueError(f"{name} must have length {n}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TangentPoint:
    """Point of the velocity phase chart: (q, qdot)."""

    q: np.ndarray
    qdot: np.ndarray

    def __post_init__(self):
        n = np.asarray(self.q).size
        object.__setattr__(self, "q", _finite_vector(self.q, n, "q"))
        object.__setattr__(self, "qdot", _finite_vector(self.qdot, n, "qdot"))

    @property
    def n(self) -> int:
        return self.q.size

    def as_array(self) -> np.ndarray:
        """Concatenated (q, qdot), the tape's active-variable layout."""
        return np.concatenate([self.q, self.qdot])


@dataclass(frozen=True, eq=False)
class CotangentPoint:
    """Point of the momentum phase chart: (q, p)."""

    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        n = np.asarray(self.q).size
        object.__setattr__(self, "q", _finite_vector(self.q, n, "q"))
        object.__setattr__(self, "p", _finite_vector(self.p, n, "p"))

    @property
    def n(self) -> int:
        return self.q.size

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.q, self.p])


@dataclass(frozen=True, eq=False)
class DoubleTangentVector:
    """Tangent vector to the velocity phase chart at a base point."""

    base: TangentPoint
    dq: np.ndarray
    dqdot: np.ndarray

    def __post_init__(self):
        n = self.base.n
        object.__setattr__(self, "dq", _finite_vector(self.dq, n, "dq"))
        object.__setattr__(self, "dqdot", _finite_vector(self.dqdot, n, "dqdot"))

    def as_vector(self) -> np.ndarray:
        """Components (dq, dqdot) stacked to pair with a form matrix."""
        return np.concatenate([self.dq, self.dqdot])


@dataclass(frozen=True, eq=False)
class TwoFormAtPoint:
    """Antisymmetric bilinear form at a point, pairing w(u,v) = u^T W v."""

    base: object
    matrix: np.ndarray
    symplectic: bool = False
    min_singular_value: float = field(default=SYMPLECTIC_MIN_SV, repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("form matrix must be square")
        skew = np.max(np.abs(m + m.T)) if m.size else 0.0
        if skew > ANTISYM_TOL:
            raise ValueError(f"form matrix not antisymmetric: |W + W^T| = {skew:.3e}")
        if self.symplectic:
            sv = np.linalg.svd(m, compute_uv=False)
            if sv[-1] <= self.min_singular_value:
                raise ValueError(
                    f"degenerate form: smallest singular value {sv[-1]:.3e}"
                )
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def __call__(self, u, v) -> float:
        u = u.as_vector() if isinstance(u, DoubleTangentVector) else np.asarray(u, float)
        v = v.as_vector() if isinstance(v, DoubleTangentVector) else np.asarray(v, float)
        return float(u @ self.matrix @ v)


def canonical_form(point: CotangentPoint) -> TwoFormAtPoint:
    """Canonical symplectic form on the momentum chart, [[0, I], [-I, 0]]."""
    n = point.n
    eye = np.eye(n)
    zero = np.zeros((n, n))
    omega = np.block([[zero, eye], [-eye, zero]])
    return TwoFormAtPoint(point, omega, symplectic=True)


def pullback_form(jacobian, form: TwoFormAtPoint, base=None,
                  symplectic: Optional[bool] = None,
                  min_singular_value: Optional[float] = None) -> TwoFormAtPoint:
    """Pull a form back through a linear map: W' = J^T W J.

    The result is antisymmetrized as 0.5*(A - A^T), which is exact in floating
    point and removes the one-ulp asymmetry matrix products can introduce.
    """
    J = np.asarray(jacobian, dtype=float)
    if not np.all(np.isfinite(J)):
        raise ValueError("Jacobian has non-finite entries")
    A = J.T @ form.matrix @ J
    A = 0.5 * (A - A.T)
    flag = form.symplectic if symplectic is None else symplectic
    sv = form.min_singular_value if min_singular_value is None else min_singular_value
    return TwoFormAtPoint(form.base if base is None else base, A,
                          symplectic=flag, min_singular_value=sv)


class PointMap:
    """Differentiable map between configuration charts, given by expressions.

    Components are expressions in the source coordinates only.  When inverse
    expressions are supplied the round trip is verified on seeded samples of
    the source box at construction.
    """

    def __init__(self, source: ConfigSpace, target: ConfigSpace,
                 exprs: Sequence, inverse_exprs: Optional[Sequence] = None,
                 check_inverse: bool = True):
        self.source = source
        self.target = target
        self._fwd_symbols = source.symbol_table()
        self._inv_symbols = target.symbol_table()
        self.exprs = tuple(self._component(e, self._fwd_symbols, source) for e in exprs)
        if len(self.exprs) != target.n:
            raise ValueError(f"need {target.n} component expressions, got {len(self.exprs)}")
        self._tapes = tuple(compile_tape(e, self._fwd_symbols) for e in self.exprs)
        self.inverse_exprs = None
        self._inv_tapes = None
        if inverse_exprs is not None:
            self.inverse_exprs = tuple(
                self._component(e, self._inv_symbols, target) for e in inverse_exprs
            )
            if len(self.inverse_exprs) != source.n:
                raise ValueError("inverse component count must match the source dimension")
            self._inv_tapes = tuple(
                compile_tape(e, self._inv_symbols) for e in self.inverse_exprs
            )
            if check_inverse:
                self._verify_inverse()

    @staticmethod
    def _component(e, symbols: SymbolTable, space: ConfigSpace) -> Expr:
        node = parse(e, symbols) if isinstance(e, str) else e
        extra = free_names(node) - set(space.coords)
        if extra:
            raise ValueError(
                f"map components may only use coordinates {space.coords}, found {sorted(extra)}"
            )
        return node

    def _verify_inverse(self, samples: int = 50, seed: int = 0, tol: float = INVERSE_CHECK_TOL):
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(samples):
            q = rng.uniform(self.source.q_box[:, 0], self.source.q_box[:, 1])
            back = self.inverse_apply(self.apply(q))
            worst = max(worst, float(np.max(np.abs(back - q))))
        if worst > tol:
            raise ValueError(f"inverse expressions fail the round trip: error {worst:.3e}")

    def apply(self, q) -> np.ndarray:
        x = np.concatenate([np.asarray(q, float), np.zeros(self.source.n)])
        return np.array([t.value(x) for t in self._tapes])

    def inverse_apply(self, y) -> np.ndarray:
        if self._inv_tapes is None:
            raise ValueError("map has no inverse expressions")
        x = np.concatenate([np.asarray(y, float), np.zeros(self.target.n)])
        return np.array([t.value(x) for t in self._inv_tapes])

    def jacobian(self, q) -> np.ndarray:
        """D(phi) at q, shape (target.n, source.n)."""
        n = self.source.n
        x = np.concatenate([np.asarray(q, float), np.zeros(n)])
        J = np.zeros((self.target.n, n))
        for i, t in enumerate(self._tapes):
            _, g = t.value_grad(x)
            J[i] = g[:n]
        return J

    def component_hessians(self, q) -> np.ndarray:
        """Second derivatives d2(phi^i)/dq dq, shape (target.n, n, n)."""
        n = self.source.n
        x = np.concatenate([np.asarray(q, float), np.zeros(n)])
        H = np.zeros((self.target.n, n, n))
        for i, t in enumerate(self._tapes):
            H[i] = t.eval2(x).hessian[:n, :n]
        return H

    def inverse_jacobian(self, y) -> np.ndarray:
        if self._inv_tapes is None:
            raise ValueError("map has no inverse expressions")
        n = self.target.n
        x = np.concatenate([np.asarray(y, float), np.zeros(n)])
        J = np.zeros((self.source.n, n))
        for i, t in enumerate(self._inv_tapes):
            _, g = t.value_grad(x)
            J[i] = g[:n]
        return J


def tangent_lift(point_map: PointMap, v: TangentPoint) -> TangentPoint:
    """T(phi): (q, qdot) -> (phi(q), D(phi)(q) qdot)."""
    J = point_map.jacobian(v.q)
    return TangentPoint(point_map.apply(v.q), J @ v.qdot)


def tangent_lift_jacobian(point_map: PointMap, v: TangentPoint) -> np.ndarray:
    """Jacobian of T(phi) at v in the (q, qdot) chart: [[J, 0], [H[qdot], J]]."""
    J = point_map.jacobian(v.q)
    H = point_map.component_hessians(v.q)
    lower_left = np.einsum("ijk,k->ij", H, v.qdot)
    zero = np.zeros_like(J)
    return np.block([[J, zero], [lower_left, J]])


def double_tangent_lift(point_map: PointMap, w: DoubleTangentVector) -> DoubleTangentVector:
    """T(T(phi)): transport the base by T(phi), the components by its Jacobian."""
    base = tangent_lift(point_map, w.base)
    JT = tangent_lift_jacobian(point_map, w.base)
    out = JT @ w.as_vector()
    n = point_map.target.n
    return DoubleTangentVector(base, out[:n], out[n:])

"""Translation symmetries, momentum maps, invariance checks, algebra data.

Group actions are abelian translations along designated cyclic coordinates
(periodic coordinates give torus factors, the rest give R^k).  Non-abelian
structure enters only through Lie-algebra structure constants and the
+-form pairing on coadjoint directions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence

import numpy as np

from .dynamics import euler_lagrange_field
from .geometry import ConfigSpace, CotangentPoint, TangentPoint
from .lagrangian import LagrangianSystem, legendre_transform

JACOBI_TOL = 1e-12


class TranslationSymmetry:
    """Translations along cyclic coordinates of a configuration space."""

    def __init__(self, space: ConfigSpace, cyclic: Sequence):
        self.space = space
        indices = []
        for c in cyclic:
            if isinstance(c, str):
                if c not in space.coords:
                    raise ValueError(f"unknown cyclic coordinate {c!r}")
                indices.append(space.coords.index(c))
            else:
                i = int(c)
                if not 0 <= i < space.n:
                    raise ValueError(f"cyclic index {i} out of range")
                indices.append(i)
        if len(set(indices)) != len(indices):
            raise ValueError("cyclic coordinates must be distinct")
        if not indices:
            raise ValueError("need at least one cyclic coordinate")
        self.cyclic = tuple(indices)
        self.names = tuple(space.coords[i] for i in self.cyclic)
        self.shape = tuple(i for i in range(space.n) if i not in self.cyclic)

    @property
    def k(self) -> int:
        return len(self.cyclic)

    def _shift(self, g) -> np.ndarray:
        g = np.asarray(g, dtype=float).reshape(-1)
        if g.shape != (self.k,):
            raise ValueError(f"group element must have {self.k} components")
        out = np.zeros(self.space.n)
        out[list(self.cyclic)] = g
        return out

    def act(self, g, v: TangentPoint) -> TangentPoint:
        """Tangent-lifted action: shift cyclic positions, keep velocities."""
        return TangentPoint(self.space.wrap(v.q + self._shift(g)), v.qdot)

    def act_cotangent(self, g, alpha: CotangentPoint) -> CotangentPoint:
        """Cotangent-lifted action: shift cyclic positions, keep momenta."""
        return CotangentPoint(self.space.wrap(alpha.q + self._shift(g)), alpha.p)

    def sample_group(self, rng: np.random.Generator, scale: float = 2.0) -> np.ndarray:
        return rng.uniform(-scale, scale, size=self.k)


def momentum_map_cotangent(sym: TranslationSymmetry, alpha: CotangentPoint) -> np.ndarray:
    """Pair the momenta with the translation generators: components p_c."""
    return alpha.p[list(sym.cyclic)].copy()


def momentum_map_lagrangian(sym: TranslationSymmetry, sys: LagrangianSystem,
                            v: TangentPoint) -> np.ndarray:
    """Velocity-chart momentum map: components dL/dqdot at cyclic slots."""
    n = sys.n
    _, g = sys.tape.value_grad(v.as_array(), sys.param_values)
    return g[n:][list(sym.cyclic)].copy()


def momentum_monitor(sym: TranslationSymmetry, sys: LagrangianSystem,
                     component: int) -> Callable[[TangentPoint], float]:
    """Per-step monitor returning one momentum component."""
    idx = sym.cyclic[component]
    n = sys.n

    def fn(v: TangentPoint) -> float:
        _, g = sys.tape.value_grad(v.as_array(), sys.param_values)
        return float(g[n + idx])

    return fn


@dataclass(frozen=True)
class SampledReport:
    """Outcome of a sampled sup-norm check."""

    ok: bool
    max_discrepancy: float
    witness: Optional[TangentPoint]
    tol: float
    samples: int
    detail: Dict[str, float] = field(default_factory=dict)


def check_invariance(sym: TranslationSymmetry, sys: LagrangianSystem,
                     samples: int = 100, seed: int = 0, tol: float = 1e-9,
                     extra_maps: Optional[Dict[str, Callable]] = None) -> SampledReport:
    """Certify L (and any supplied state-dependent maps) ignore group shifts.

    extra_maps values are callables v -> vector; each is required to return
    the same vector at v and at every sampled shift of v.
    """
    rng = np.random.default_rng(seed)
    extra_maps = extra_maps or {}
    worst = 0.0
    witness = None
    detail = {name: 0.0 for name in ("L", *extra_maps)}
    for _ in range(samples):
        v = sys.space.sample(rng)
        g = sym.sample_group(rng)
        shifted = sym.act(g, v)
        gap = abs(sys.lagrangian_value(shifted) - sys.lagrangian_value(v))
        detail["L"] = max(detail["L"], gap)
        if gap > worst:
            worst, witness = gap, v
        for name, fn in extra_maps.items():
            d = float(np.max(np.abs(np.asarray(fn(shifted)) - np.asarray(fn(v)))))
            detail[name] = max(detail[name], d)
            if d > worst:
                worst, witness = d, v
    return SampledReport(ok=worst <= tol, max_discrepancy=worst, witness=witness,
                         tol=tol, samples=samples, detail=detail)


def check_equivariance(sym: TranslationSymmetry, sys: LagrangianSystem,
                       samples: int = 100, seed: int = 0, tol: float = 1e-9
                       ) -> SampledReport:
    """The momentum map must commute with group shifts (trivial coadjoint)."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    witness = None
    for _ in range(samples):
        v = sys.space.sample(rng)
        g = sym.sample_group(rng)
        d = float(np.max(np.abs(
            momentum_map_lagrangian(sym, sys, sym.act(g, v))
            - momentum_map_lagrangian(sym, sys, v)
        )))
        if d > worst:
            worst, witness = d, v
    return SampledReport(ok=worst <= tol, max_discrepancy=worst, witness=witness,
                         tol=tol, samples=samples)


def check_momentum_composition(sym: TranslationSymmetry, sys: LagrangianSystem,
                               samples: int = 100, seed: int = 0) -> SampledReport:
    """The velocity-chart momentum map factors through the fiber derivative.

    Both code paths read the same derivative, so the match is exact.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    witness = None
    for _ in range(samples):
        v = sys.space.sample(rng)
        via = momentum_map_cotangent(sym, legendre_transform(sys, v))
        direct = momentum_map_lagrangian(sym, sys, v)
        d = float(np.max(np.abs(via - direct)))
        if d > worst:
            worst, witness = d, v
    return SampledReport(ok=worst == 0.0, max_discrepancy=worst, witness=witness,
                         tol=0.0, samples=samples)


def check_noether_pointwise(sym: TranslationSymmetry, sys: LagrangianSystem,
                            samples: int = 200, seed: int = 0, tol: float = 1e-9
                            ) -> SampledReport:
    """dJ(xi) = 0 along the dynamics, the infinitesimal conservation law."""
    rng = np.random.default_rng(seed)
    xi = euler_lagrange_field(sys)
    worst = 0.0
    witness = None
    for _ in range(samples):
        v = sys.space.sample(rng)
        b = sys.blocks(v)
        out = xi(v)
        for c in sym.cyclic:
            rate = float(b.B[c] @ out.dq + b.M[c] @ out.dqdot)
            if abs(rate) > worst:
                worst, witness = abs(rate), v
    return SampledReport(ok=worst <= tol, max_discrepancy=worst, witness=witness,
                         tol=tol, samples=samples)


def check_momentum_generates_action(sym: TranslationSymmetry, sys: LagrangianSystem,
                                    samples: int = 100, seed: int = 0,
                                    tol: float = 1e-9) -> SampledReport:
    """Pairing the two-form with a translation generator recovers dJ.

    The generator of translation in q_c is (dq, dqdot) = (e_c, 0); its
    contraction with the two-form must equal the differential of the matching
    momentum component (rows (B[c], M[c])).  For invariant Lagrangians the
    B-block column at c vanishes, making the identity hold.
    """
    from .lagrangian import lagrangian_two_form

    rng = np.random.default_rng(seed)
    n = sys.n
    worst = 0.0
    witness = None
    for _ in range(samples):
        v = sys.space.sample(rng)
        b = sys.blocks(v)
        omega = lagrangian_two_form(sys, v).matrix
        for c in sym.cyclic:
            gen = np.zeros(2 * n)
            gen[c] = 1.0
            lhs = gen @ omega
            rhs = np.concatenate([b.B[c], b.M[c]])
            d = float(np.max(np.abs(lhs - rhs)))
            if d > worst:
                worst, witness = d, v
    return SampledReport(ok=worst <= tol, max_discrepancy=worst, witness=witness,
                         tol=tol, samples=samples)


@dataclass(frozen=True)
class RegularValueCertificate:
    ok: bool
    min_singular_value: float
    witness: Optional[TangentPoint]
    threshold: float
    samples: int


def check_regular_value(sym: TranslationSymmetry, sys: LagrangianSystem,
                        samples: int = 100, seed: int = 0,
                        threshold: float = 1e-8) -> RegularValueCertificate:
    """Full rank of the momentum map's velocity derivative at samples.

    The derivative rows are the mass-matrix rows at the cyclic indices; full
    rank makes every momentum value regular over the sampled region.
    """
    rng = np.random.default_rng(seed)
    worst = np.inf
    witness = None
    rows = list(sym.cyclic)
    for _ in range(samples):
        v = sys.space.sample(rng)
        M = sys.blocks(v).M
        sv = np.linalg.svd(M[rows], compute_uv=False)[-1]
        if sv < worst:
            worst, witness = float(sv), v
    return RegularValueCertificate(ok=worst >= threshold, min_singular_value=worst,
                                   witness=witness, threshold=threshold,
                                   samples=samples)


class LieAlgebra:
    """Finite-dimensional real Lie algebra given by structure constants.

    C[k, i, j] is the e_k coefficient of [e_i, e_j].  Antisymmetry and the
    Jacobi identity are validated at construction.
    """

    def __init__(self, structure_constants, name: str = ""):
        C = np.asarray(structure_constants, dtype=float)
        if C.ndim != 3 or len(set(C.shape)) != 1:
            raise ValueError("structure constants must have shape (d, d, d)")
        skew = np.max(np.abs(C + C.transpose(0, 2, 1))) if C.size else 0.0
        if skew > JACOBI_TOL:
            raise ValueError(f"structure constants not antisymmetric: {skew:.3e}")
        t1 = np.einsum("mij,lmk->lijk", C, C)
        t2 = np.einsum("mjk,lmi->lijk", C, C)
        t3 = np.einsum("mki,lmj->lijk", C, C)
        jac = np.max(np.abs(t1 + t2 + t3)) if C.size else 0.0
        if jac > JACOBI_TOL:
            raise ValueError(f"Jacobi identity violated: {jac:.3e}")
        self.C = C
        self.d = C.shape[0]
        self.name = name

    def bracket(self, xi, eta) -> np.ndarray:
        return np.einsum("kij,i,j->k", self.C, np.asarray(xi, float),
                         np.asarray(eta, float))

    @staticmethod
    def abelian(d: int) -> "LieAlgebra":
        return LieAlgebra(np.zeros((d, d, d)), name=f"abelian({d})")

    @staticmethod
    def so3() -> "LieAlgebra":
        """Rotations: [e_i, e_j] = sum_k eps_ijk e_k."""
        C = np.zeros((3, 3, 3))
        for (i, j, k), sign in [((0, 1, 2), 1.0), ((1, 2, 0), 1.0), ((2, 0, 1), 1.0),
                                ((1, 0, 2), -1.0), ((2, 1, 0), -1.0), ((0, 2, 1), -1.0)]:
            C[k, i, j] = sign
        return LieAlgebra(C, name="so(3)")


def coadjoint_plus_form(algebra: LieAlgebra, nu, xi, eta) -> float:
    """Pair nu with the bracket of xi and eta: sum_k nu_k C[k,i,j] xi_i eta_j."""
    return float(np.einsum("kij,k,i,j->", algebra.C, np.asarray(nu, float),
                           np.asarray(xi, float), np.asarray(eta, float)))

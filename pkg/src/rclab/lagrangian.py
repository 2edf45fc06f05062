"""Regular Lagrangian systems on a chart.

A system bundles a configuration space, a Lagrangian expression over
(q, qdot, params), parameter values, and tolerances.  Construction certifies
hyperregularity (the velocity Hessian M = d2L/dqdot dqdot stays away from
singular) by seeded sampling over the declared box; everything downstream
leans on that certificate.

The two-form is defined as the pullback of the canonical form through the
fiber derivative, J^T Omega0 J with J = [[I, 0], [B, M]]; the coordinate
block formula [[B - B^T, M], [-M, 0]] is kept only as a cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence

import numpy as np

from .expr import Dual2Value, Expr, compile_tape, free_names, parse
from .geometry import (
    ConfigSpace,
    CotangentPoint,
    TangentPoint,
    TwoFormAtPoint,
    canonical_form,
    pullback_form,
)


@dataclass(frozen=True)
class Tolerances:
    """Numeric thresholds used across a system's checks."""

    hyperreg_min: float = 1e-8
    hyperreg_samples: int = 512
    newton_tol: float = 1e-12
    newton_max_iter: int = 50
    legendre_roundtrip: float = 1e-10
    form_min_sv: float = 1e-10


@dataclass(frozen=True)
class HyperregCertificate:
    """Outcome of seeded hyperregularity sampling."""

    ok: bool
    min_singular_value: float
    min_abs_det: float
    margin: float
    witness: TangentPoint
    samples: int
    seed: int
    threshold: float


class HyperregularityError(ValueError):
    def __init__(self, certificate: HyperregCertificate):
        self.certificate = certificate
        w = certificate.witness
        super().__init__(
            "velocity Hessian nearly singular: smallest singular value "
            f"{certificate.min_singular_value:.3e} < {certificate.threshold:.3e} "
            f"at q={w.q.tolist()}, qdot={w.qdot.tolist()}"
        )


class NewtonError(RuntimeError):
    pass


@dataclass(frozen=True)
class DerivativeBlocks:
    """First and second derivatives of L at a point, split by (q, qdot).

    B has entries B[i, j] = d2L/dqdot^i dq^j, the momentum-by-position block.
    """

    L: float
    L_q: np.ndarray
    p: np.ndarray
    L_qq: np.ndarray
    B: np.ndarray
    M: np.ndarray


class LagrangianSystem:
    """Immutable (space, L, params) triple with a hyperregularity certificate."""

    def __init__(self, space: ConfigSpace, lagrangian, params: Optional[Dict[str, float]] = None,
                 tolerances: Optional[Tolerances] = None, certify: bool = True,
                 seed: int = 0):
        self.space = space
        self.params = dict(params or {})
        self.tol = tolerances or Tolerances()
        self.symbols = space.symbol_table(tuple(self.params.keys()))
        node = parse(lagrangian, self.symbols) if isinstance(lagrangian, str) else lagrangian
        unknown = free_names(node) - set(self.symbols.actives) - set(self.symbols.params)
        if unknown:
            raise ValueError(f"Lagrangian uses unknown names {sorted(unknown)}")
        self.lagrangian: Expr = node
        self.tape = compile_tape(node, self.symbols)
        self.param_values = np.array(list(self.params.values()), dtype=float)
        self.certificate: Optional[HyperregCertificate] = None
        if certify:
            cert = check_hyperregular(self, self.tol.hyperreg_samples, seed)
            if not cert.ok:
                raise HyperregularityError(cert)
            self.certificate = cert

    @property
    def n(self) -> int:
        return self.space.n

    def eval_L(self, v: TangentPoint) -> Dual2Value:
        return self.tape.eval2(v.as_array(), self.param_values)

    def lagrangian_value(self, v: TangentPoint) -> float:
        return self.tape.value(v.as_array(), self.param_values)

    def blocks(self, v: TangentPoint) -> DerivativeBlocks:
        """All derivative blocks of L at v from one tape evaluation."""
        n = self.n
        d = self.eval_L(v)
        g, H = d.gradient, d.hessian
        return DerivativeBlocks(
            L=d.value,
            L_q=g[:n],
            p=g[n:],
            L_qq=H[:n, :n],
            B=H[n:, :n],
            M=H[n:, n:],
        )

    def mass_matrix(self, v: TangentPoint) -> np.ndarray:
        return self.blocks(v).M


def legendre_transform(sys: LagrangianSystem, v: TangentPoint) -> CotangentPoint:
    """Fiber derivative: (q, qdot) -> (q, dL/dqdot)."""
    n = sys.n
    _, g = sys.tape.value_grad(v.as_array(), sys.param_values)
    return CotangentPoint(v.q, g[n:])


def _probe_points(space: ConfigSpace):
    """Deterministic probes: kinetic degeneracies concentrate at qdot = 0."""
    q_mid = 0.5 * (space.q_box[:, 0] + space.q_box[:, 1])
    v_mid = 0.5 * (space.v_box[:, 0] + space.v_box[:, 1])
    v_zero = np.clip(np.zeros(space.n), space.v_box[:, 0], space.v_box[:, 1])
    return [TangentPoint(q_mid, v_zero), TangentPoint(q_mid, v_mid)]


def check_hyperregular(sys: LagrangianSystem, samples: int = 512,
                       seed: int = 0) -> HyperregCertificate:
    """Sample the velocity Hessian over the box; certify it stays invertible."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    thresh = sys.tol.hyperreg_min
    worst_sv = np.inf
    worst_det = np.inf
    witness = None
    points = _probe_points(sys.space)
    points.extend(sys.space.sample(rng) for _ in range(samples))
    for v in points:
        M = sys.blocks(v).M
        sv = np.linalg.svd(M, compute_uv=False)[-1]
        if sv < worst_sv:
            worst_sv = sv
            worst_det = abs(np.linalg.det(M))
            witness = v
    return HyperregCertificate(
        ok=bool(worst_sv >= thresh),
        min_singular_value=float(worst_sv),
        min_abs_det=float(worst_det),
        margin=float(worst_sv - thresh),
        witness=witness,
        samples=samples,
        seed=seed,
        threshold=thresh,
    )


def inverse_legendre(sys: LagrangianSystem, alpha: CotangentPoint,
                     guess: Optional[np.ndarray] = None) -> TangentPoint:
    """Invert the fiber derivative at fixed q by Newton iteration on qdot."""
    n = sys.n
    q = alpha.q
    p_target = alpha.p
    tol = sys.tol.newton_tol

    if guess is not None:
        qdot = np.asarray(guess, dtype=float).copy()
    else:
        # exact for Lagrangians quadratic in qdot, a warm start otherwise
        try:
            M0 = sys.blocks(TangentPoint(q, np.zeros(n))).M
            qdot = np.linalg.solve(M0, p_target)
        except (np.linalg.LinAlgError, ValueError):
            qdot = p_target.copy()

    for _ in range(sys.tol.newton_max_iter):
        blocks = sys.blocks(TangentPoint(q, qdot))
        residual = blocks.p - p_target
        if np.max(np.abs(residual)) <= tol:
            result = TangentPoint(q, qdot)
            check = legendre_transform(sys, result)
            err = np.max(np.abs(check.p - p_target))
            if err > sys.tol.legendre_roundtrip:
                raise NewtonError(f"fiber-derivative inversion drifted: error {err:.3e}")
            return result
        try:
            qdot = qdot - np.linalg.solve(blocks.M, residual)
        except np.linalg.LinAlgError:
            raise NewtonError("singular Newton Jacobian while inverting the fiber derivative")
    raise NewtonError(
        "fiber-derivative inversion did not converge: last residual "
        f"{np.max(np.abs(residual)):.3e}"
    )


def action_energy(sys: LagrangianSystem, v: TangentPoint):
    """Action A = p . qdot and energy E = A - L at v."""
    n = sys.n
    val, g = sys.tape.value_grad(v.as_array(), sys.param_values)
    A = float(g[n:] @ v.qdot)
    return A, A - val


def lagrangian_one_form(sys: LagrangianSystem, v: TangentPoint) -> np.ndarray:
    """Row covector (dL/dqdot, 0) in the (dq, dqdot) basis."""
    n = sys.n
    _, g = sys.tape.value_grad(v.as_array(), sys.param_values)
    out = np.zeros(2 * n)
    out[:n] = g[n:]
    return out


def fiber_jacobian(sys: LagrangianSystem, v: TangentPoint) -> np.ndarray:
    """Jacobian of the fiber derivative in the (q, qdot) chart: [[I,0],[B,M]]."""
    n = sys.n
    b = sys.blocks(v)
    J = np.zeros((2 * n, 2 * n))
    J[:n, :n] = np.eye(n)
    J[n:, :n] = b.B
    J[n:, n:] = b.M
    return J


def lagrangian_two_form(sys: LagrangianSystem, v: TangentPoint) -> TwoFormAtPoint:
    """Pullback of the canonical form through the fiber derivative."""
    omega0 = canonical_form(legendre_transform(sys, v))
    return pullback_form(fiber_jacobian(sys, v), omega0, base=v,
                         symplectic=True, min_singular_value=sys.tol.form_min_sv)


def lagrangian_two_form_blocks(sys: LagrangianSystem, v: TangentPoint) -> TwoFormAtPoint:
    """Coordinate block assembly [[B - B^T, M], [-M, 0]]; cross-check route."""
    b = sys.blocks(v)
    upper = b.B - b.B.T
    omega = np.block([[upper, b.M], [-b.M, np.zeros_like(b.M)]])
    omega = 0.5 * (omega - omega.T)
    return TwoFormAtPoint(v, omega, symplectic=True,
                          min_singular_value=sys.tol.form_min_sv)

"""Equations of motion, the momentum-chart side, and trajectory integration.

The Euler-Lagrange field is produced by the dense symplectic solve
-W xi = grad(E) at each point; the explicit chain-rule acceleration formula
lives alongside it as an independent derivation, and tests hold the two to
each other.  The dq half of the solved field is snapped to qdot exactly
after a guard confirms the solver already agrees to solver precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np

from .expr import DomainEvalError
from .geometry import (
    CotangentPoint,
    DoubleTangentVector,
    TangentPoint,
    canonical_form,
    pullback_form,
)
from .lagrangian import (
    LagrangianSystem,
    action_energy,
    fiber_jacobian,
    inverse_legendre,
    legendre_transform,
)

BLOWUP_LIMIT = 1e12
SECOND_ORDER_GUARD = 1e-9
FD_STEP_H = 1e-6


class VectorFieldOnTQ:
    """Vector field on the velocity phase chart with a provenance tag."""

    def __init__(self, evaluate: Callable[[TangentPoint], DoubleTangentVector],
                 provenance: str):
        self._evaluate = evaluate
        self.provenance = provenance

    def __call__(self, v: TangentPoint) -> DoubleTangentVector:
        out = self._evaluate(v)
        if out.base is not v:
            raise RuntimeError("field evaluation moved the base point")
        return out


@dataclass
class Trajectory:
    """Fixed-step integral curve with per-step monitor values."""

    times: np.ndarray
    states: list
    monitors: Dict[str, np.ndarray] = field(default_factory=dict)
    blown_up: bool = False
    reason: Optional[str] = None

    @property
    def final(self) -> TangentPoint:
        return self.states[-1]


def euler_lagrange_field(sys: LagrangianSystem) -> VectorFieldOnTQ:
    """The dynamics as the solution of -W xi = grad(E) at each point."""
    if sys.certificate is None:
        raise ValueError("system lacks a hyperregularity certificate")
    n = sys.n

    def ev(v: TangentPoint) -> DoubleTangentVector:
        b = sys.blocks(v)
        J = np.zeros((2 * n, 2 * n))
        J[:n, :n] = np.eye(n)
        J[n:, :n] = b.B
        J[n:, n:] = b.M
        omega = pullback_form(J, canonical_form(CotangentPoint(v.q, b.p)),
                              base=v, symplectic=True,
                              min_singular_value=sys.tol.form_min_sv)
        grad_E = np.concatenate([b.B.T @ v.qdot - b.L_q, b.M @ v.qdot])
        try:
            xi = np.linalg.solve(-omega.matrix, grad_E)
        except np.linalg.LinAlgError:
            raise ValueError("symplectic solve failed: non-hyperregular point")
        scale = max(1.0, float(np.max(np.abs(v.qdot))))
        gap = float(np.max(np.abs(xi[:n] - v.qdot)))
        if gap > SECOND_ORDER_GUARD * scale:
            raise ArithmeticError(
                f"solved field violates the second-order property: gap {gap:.3e}"
            )
        return DoubleTangentVector(v, v.qdot.copy(), xi[n:])

    return VectorFieldOnTQ(ev, "euler-lagrange")


def euler_lagrange_ode(sys: LagrangianSystem, v: TangentPoint) -> np.ndarray:
    """Acceleration from the chain-rule expansion: qddot = M^-1 (L_q - B qdot)."""
    b = sys.blocks(v)
    try:
        return np.linalg.solve(b.M, b.L_q - b.B @ v.qdot)
    except np.linalg.LinAlgError:
        raise ValueError("singular mass matrix")


class HamiltonianSide:
    """Energy pushed to the momentum chart, with its canonical field.

    The value is E composed with the inverse fiber derivative.  Derivatives
    are central differences over (q, p); each perturbed inversion reuses the
    base velocity as a warm start and applies one extra Newton refinement,
    which keeps the finite-difference noise near the 1e-10 floor.
    """

    def __init__(self, sys: LagrangianSystem, fd_step: float = FD_STEP_H):
        self.sys = sys
        self.fd_step = fd_step

    def _invert(self, q, p, guess=None) -> TangentPoint:
        v = inverse_legendre(self.sys, CotangentPoint(q, p), guess=guess)
        b = self.sys.blocks(v)
        qdot = v.qdot - np.linalg.solve(b.M, b.p - p)
        return TangentPoint(q, qdot)

    def value(self, alpha: CotangentPoint, guess=None) -> float:
        v = self._invert(alpha.q, alpha.p, guess=guess)
        return action_energy(self.sys, v)[1]

    def gradient(self, alpha: CotangentPoint, guess=None) -> np.ndarray:
        n = self.sys.n
        base = self._invert(alpha.q, alpha.p, guess=guess)
        h = self.fd_step
        x0 = alpha.as_array()
        g = np.zeros(2 * n)
        for i in range(2 * n):
            xp = x0.copy()
            xm = x0.copy()
            xp[i] += h
            xm[i] -= h
            vp = self._invert(xp[:n], xp[n:], guess=base.qdot)
            vm = self._invert(xm[:n], xm[n:], guess=base.qdot)
            g[i] = (action_energy(self.sys, vp)[1] - action_energy(self.sys, vm)[1]) / (2 * h)
        return g

    def field(self, alpha: CotangentPoint, guess=None) -> np.ndarray:
        """X with i_X w0 = dH, i.e. the solution of -W0 X = grad(H)."""
        g = self.gradient(alpha, guess=guess)
        omega0 = canonical_form(alpha).matrix
        return np.linalg.solve(-omega0, g)


def hamiltonian_from_lagrangian(sys: LagrangianSystem) -> HamiltonianSide:
    if sys.certificate is None:
        raise ValueError("system lacks a hyperregularity certificate")
    return HamiltonianSide(sys)


@dataclass(frozen=True)
class FLRelatedReport:
    ok: bool
    max_residual: float
    witness: Optional[TangentPoint]
    tol: float
    samples: int


def check_fl_related(sys: LagrangianSystem, samples: int = 100, seed: int = 0,
                     tol: float = 1e-8) -> FLRelatedReport:
    """Certify that the two derivations of the dynamics match across charts.

    At each sample the solved field is pushed through the fiber-derivative
    Jacobian and compared with the momentum-chart field at the image point.
    """
    rng = np.random.default_rng(seed)
    xi = euler_lagrange_field(sys)
    ham = hamiltonian_from_lagrangian(sys)
    worst = 0.0
    witness = None
    for _ in range(samples):
        v = sys.space.sample(rng)
        lhs = fiber_jacobian(sys, v) @ xi(v).as_vector()
        alpha = legendre_transform(sys, v)
        rhs = ham.field(alpha, guess=v.qdot)
        res = float(np.max(np.abs(lhs - rhs)))
        if res > worst:
            worst = res
            witness = v
    return FLRelatedReport(ok=worst <= tol, max_residual=worst,
                           witness=witness, tol=tol, samples=samples)


def integrate(field_fn, v0: TangentPoint, t1: float, h: float,
              monitors: Optional[Dict[str, Callable[[TangentPoint], float]]] = None
              ) -> Trajectory:
    """Classical fixed-step fourth-order Runge-Kutta on (q, qdot).

    The step is adjusted to the nearest value that divides t1 evenly so the
    trajectory lands exactly on the requested end time.  Integration aborts
    with a partial trajectory when any state component exceeds 1e12 or a
    stage evaluation leaves the expression domain.
    """
    if h <= 0 or t1 <= 0:
        raise ValueError("need h > 0 and t1 > 0")
    steps = max(1, int(round(t1 / h)))
    step = t1 / steps
    n = v0.n
    monitors = monitors or {}

    states = [v0]
    times = [0.0]
    values = {name: [fn(v0)] for name, fn in monitors.items()}

    def deriv(x: np.ndarray) -> np.ndarray:
        out = field_fn(TangentPoint(x[:n], x[n:]))
        return out.as_vector()

    x = v0.as_array().copy()
    blown_up = False
    reason = None
    for k in range(steps):
        try:
            k1 = deriv(x)
            k2 = deriv(x + 0.5 * step * k1)
            k3 = deriv(x + 0.5 * step * k2)
            k4 = deriv(x + step * k3)
        except (DomainEvalError, ValueError) as exc:
            blown_up = True
            reason = f"stage evaluation failed: {exc}"
            break
        x_new = x + (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x_new)) or np.max(np.abs(x_new)) > BLOWUP_LIMIT:
            blown_up = True
            reason = f"state exceeded {BLOWUP_LIMIT:.0e} at t={times[-1] + step:.6g}"
            break
        x = x_new
        v = TangentPoint(x[:n], x[n:])
        try:
            new_vals = {name: fn(v) for name, fn in monitors.items()}
        except (DomainEvalError, ValueError) as exc:
            blown_up = True
            reason = f"monitor evaluation failed: {exc}"
            break
        states.append(v)
        times.append((k + 1) * step)
        for name, val in new_vals.items():
            values[name].append(val)

    return Trajectory(
        times=np.array(times),
        states=states,
        monitors={name: np.array(vals) for name, vals in values.items()},
        blown_up=blown_up,
        reason=reason,
    )

"""Shared system factories used across test modules."""

import numpy as np

from rclab.geometry import ConfigSpace
from rclab.lagrangian import LagrangianSystem

TWO_PI = 2.0 * np.pi


def make_ho(m=1.0, k=1.0):
    """Harmonic oscillator on the line."""
    space = ConfigSpace(["q"], q_box=(-1.5, 1.5), v_box=(-1.5, 1.5))
    return LagrangianSystem(space, "0.5*m*q_dot^2 - 0.5*k*q^2", {"m": m, "k": k})


def make_free_particle():
    """Free particle in the plane; x is cyclic."""
    space = ConfigSpace(["x", "y"], q_box=(-2.0, 2.0), v_box=(-2.0, 2.0))
    return LagrangianSystem(space, "0.5*(x_dot^2 + y_dot^2)", {})


def make_central_force():
    """Planar central force in polar coordinates; th is cyclic."""
    space = ConfigSpace(
        ["r", "th"],
        q_box=[(0.6, 2.5), (0.0, TWO_PI)],
        v_box=(-1.5, 1.5),
        periodic=[False, True],
    )
    return LagrangianSystem(space, "0.5*(r_dot^2 + r^2*th_dot^2) + 1/r", {})


def make_pendulum_cart(M=1.0, m=1.0, l=1.0, g=1.0):
    """Pendulum on a cart; s is the cart position and cyclic, phi=0 is upright."""
    space = ConfigSpace(
        ["s", "phi"],
        q_box=[(-2.0, 2.0), (0.0, TWO_PI)],
        v_box=(-1.5, 1.5),
        periodic=[False, True],
    )
    source = ("0.5*(M + m)*s_dot^2 + m*l*cos(phi)*s_dot*phi_dot"
              " + 0.5*m*l^2*phi_dot^2 - m*g*l*cos(phi)")
    return LagrangianSystem(space, source, {"M": M, "m": m, "l": l, "g": g})


BUILTIN_FACTORIES = [make_ho, make_free_particle, make_central_force, make_pendulum_cart]

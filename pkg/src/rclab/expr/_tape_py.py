"""Pure-Python tape kernel.

Mirrors the compiled kernel operation for operation: every arithmetic
expression is written in the same order so both backends produce bit
identical floats.  Symmetric rank-two updates are accumulated into a
separate matrix before being combined, which keeps every Hessian exactly
symmetric in floating point, not just up to rounding.
"""

from __future__ import annotations

import math

import numpy as np


def _powi(base: float, k: int) -> float:
    n = -k if k < 0 else k
    r = 1.0
    for _ in range(n):
        r *= base
    if k < 0:
        r = 1.0 / r
    return r


def evaluate(ops, i1, i2, consts, x, params, mode, nv):
    """Run the tape; returns (err, slot, value, grad, hess).

    err is 0 on success, otherwise a domain-error code and the slot where
    it occurred.  grad/hess are None when the mode does not request them.
    """
    n = len(ops)
    vals = np.zeros(n)
    grads = np.zeros((n, nv)) if mode >= 1 else None
    hesss = np.zeros((n, nv, nv)) if mode >= 2 else None

    for k in range(n):
        op = int(ops[k])
        a = int(i1[k])
        b = int(i2[k])

        if op == 0:  # CONST
            vals[k] = consts[k]
        elif op == 1:  # VAR
            vals[k] = x[a]
            if mode >= 1:
                grads[k, a] = 1.0
        elif op == 2:  # PARAM
            vals[k] = params[a]
        elif op == 3:  # NEG
            vals[k] = -vals[a]
            if mode >= 1:
                grads[k] = -grads[a]
            if mode >= 2:
                hesss[k] = -hesss[a]
        elif op == 4:  # ADD
            vals[k] = vals[a] + vals[b]
            if mode >= 1:
                grads[k] = grads[a] + grads[b]
            if mode >= 2:
                hesss[k] = hesss[a] + hesss[b]
        elif op == 5:  # SUB
            vals[k] = vals[a] - vals[b]
            if mode >= 1:
                grads[k] = grads[a] - grads[b]
            if mode >= 2:
                hesss[k] = hesss[a] - hesss[b]
        elif op == 6:  # MUL
            va = vals[a]
            vb = vals[b]
            vals[k] = va * vb
            if mode >= 1:
                grads[k] = vb * grads[a] + va * grads[b]
            if mode >= 2:
                s = np.outer(grads[a], grads[b])
                s = s + s.T
                hesss[k] = vb * hesss[a] + va * hesss[b] + s
        elif op == 7:  # DIV
            vb = vals[b]
            if vb == 0.0:
                return 1, k, 0.0, None, None
            v = vals[a] / vb
            vals[k] = v
            if mode >= 1:
                g = (grads[a] - v * grads[b]) / vb
                grads[k] = g
                if mode >= 2:
                    s = np.outer(g, grads[b])
                    s = s + s.T
                    hesss[k] = ((hesss[a] - v * hesss[b]) - s) / vb
        elif op == 8:  # POWI, integer exponent in i2
            va = vals[a]
            if va == 0.0 and b < 0:
                return 4, k, 0.0, None, None
            vals[k] = _powi(va, b)
            if mode >= 1:
                c1 = b * _powi(va, b - 1) if b != 0 else 0.0
                grads[k] = c1 * grads[a]
                if mode >= 2:
                    c2 = b * (b - 1) * _powi(va, b - 2) if b not in (0, 1) else 0.0
                    hesss[k] = c1 * hesss[a] + c2 * np.outer(grads[a], grads[a])
        else:  # unary functions share the chain rule below
            va = vals[a]
            if op == 9:  # SIN
                v = math.sin(va)
                c1 = math.cos(va)
                c2 = -v
            elif op == 10:  # COS
                v = math.cos(va)
                c1 = -math.sin(va)
                c2 = -v
            elif op == 11:  # TAN
                v = math.tan(va)
                c1 = 1.0 + v * v
                c2 = 2.0 * v * c1
            elif op == 12:  # EXP
                try:
                    v = math.exp(va)
                except OverflowError:
                    v = math.inf
                c1 = v
                c2 = v
            elif op == 13 or op == 15:  # LOG / LOGP
                if va <= 0.0:
                    return (2 if op == 13 else 6), k, 0.0, None, None
                v = math.log(va)
                c1 = 1.0 / va
                c2 = -c1 * c1
            elif op == 14:  # SQRT
                if va < 0.0:
                    return 3, k, 0.0, None, None
                if va == 0.0 and mode >= 1:
                    return 1, k, 0.0, None, None
                v = math.sqrt(va)
                c1 = 0.5 / v
                c2 = -0.5 * c1 / va
            else:
                raise ValueError(f"unknown opcode {op}")
            vals[k] = v
            if mode >= 1:
                grads[k] = c1 * grads[a]
            if mode >= 2:
                hesss[k] = c1 * hesss[a] + c2 * np.outer(grads[a], grads[a])

        if not math.isfinite(vals[k]):
            return 5, k, 0.0, None, None

    root = n - 1
    g = grads[root].copy() if mode >= 1 else None
    h = hesss[root].copy() if mode >= 2 else None
    return 0, root, float(vals[root]), g, h

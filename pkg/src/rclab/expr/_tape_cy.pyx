# cython: language_level=3
"""Compiled tape kernel.

Keep this file in lockstep with _tape_py.py: the arithmetic must be written
in the same order so both backends produce bit identical floats.  Symmetric
rank-two terms go through an explicit s = ga[i]*gb[j] + ga[j]*gb[i] so the
Hessian stays exactly symmetric.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, exp, isfinite, log, sin, sqrt, tan

cnp.import_array()


cdef double _powi(double base, int k) noexcept nogil:
    cdef int n = -k if k < 0 else k
    cdef double r = 1.0
    cdef int i
    for i in range(n):
        r *= base
    if k < 0:
        r = 1.0 / r
    return r


def evaluate(cnp.int32_t[::1] ops, cnp.int32_t[::1] i1, cnp.int32_t[::1] i2,
             double[::1] consts, double[::1] x, double[::1] params,
             int mode, int nv):
    """Run the tape; returns (err, slot, value, grad, hess)."""
    cdef int n = ops.shape[0]
    vals_arr = np.zeros(n)
    grads_arr = np.zeros((n, nv)) if mode >= 1 else np.zeros((1, 1))
    hesss_arr = np.zeros((n, nv, nv)) if mode >= 2 else np.zeros((1, 1, 1))
    cdef double[::1] vals = vals_arr
    cdef double[:, ::1] grads = grads_arr
    cdef double[:, :, ::1] hesss = hesss_arr

    cdef int k, a, b, op, i, j, err
    cdef double va, vb, v, c1, c2, s

    err = 0
    with nogil:
        for k in range(n):
            op = ops[k]
            a = i1[k]
            b = i2[k]

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
                    for i in range(nv):
                        grads[k, i] = -grads[a, i]
                if mode >= 2:
                    for i in range(nv):
                        for j in range(nv):
                            hesss[k, i, j] = -hesss[a, i, j]
            elif op == 4:  # ADD
                vals[k] = vals[a] + vals[b]
                if mode >= 1:
                    for i in range(nv):
                        grads[k, i] = grads[a, i] + grads[b, i]
                if mode >= 2:
                    for i in range(nv):
                        for j in range(nv):
                            hesss[k, i, j] = hesss[a, i, j] + hesss[b, i, j]
            elif op == 5:  # SUB
                vals[k] = vals[a] - vals[b]
                if mode >= 1:
                    for i in range(nv):
                        grads[k, i] = grads[a, i] - grads[b, i]
                if mode >= 2:
                    for i in range(nv):
                        for j in range(nv):
                            hesss[k, i, j] = hesss[a, i, j] - hesss[b, i, j]
            elif op == 6:  # MUL
                va = vals[a]
                vb = vals[b]
                vals[k] = va * vb
                if mode >= 1:
                    for i in range(nv):
                        grads[k, i] = vb * grads[a, i] + va * grads[b, i]
                if mode >= 2:
                    for i in range(nv):
                        for j in range(nv):
                            s = grads[a, i] * grads[b, j] + grads[a, j] * grads[b, i]
                            hesss[k, i, j] = vb * hesss[a, i, j] + va * hesss[b, i, j] + s
            elif op == 7:  # DIV
                vb = vals[b]
                if vb == 0.0:
                    err = 1
                    break
                v = vals[a] / vb
                vals[k] = v
                if mode >= 1:
                    for i in range(nv):
                        grads[k, i] = (grads[a, i] - v * grads[b, i]) / vb
                    if mode >= 2:
                        for i in range(nv):
                            for j in range(nv):
                                s = grads[k, i] * grads[b, j] + grads[k, j] * grads[b, i]
                                hesss[k, i, j] = ((hesss[a, i, j] - v * hesss[b, i, j]) - s) / vb
            elif op == 8:  # POWI, integer exponent in i2
                va = vals[a]
                if va == 0.0 and b < 0:
                    err = 4
                    break
                vals[k] = _powi(va, b)
                if mode >= 1:
                    c1 = b * _powi(va, b - 1) if b != 0 else 0.0
                    for i in range(nv):
                        grads[k, i] = c1 * grads[a, i]
                    if mode >= 2:
                        c2 = b * (b - 1) * _powi(va, b - 2) if b != 0 and b != 1 else 0.0
                        for i in range(nv):
                            for j in range(nv):
                                hesss[k, i, j] = c1 * hesss[a, i, j] + c2 * (grads[a, i] * grads[a, j])
            else:  # unary functions share the chain rule below
                va = vals[a]
                c1 = 0.0
                c2 = 0.0
                if op == 9:  # SIN
                    v = sin(va)
                    c1 = cos(va)
                    c2 = -v
                elif op == 10:  # COS
                    v = cos(va)
                    c1 = -sin(va)
                    c2 = -v
                elif op == 11:  # TAN
                    v = tan(va)
                    c1 = 1.0 + v * v
                    c2 = 2.0 * v * c1
                elif op == 12:  # EXP
                    v = exp(va)
                    c1 = v
                    c2 = v
                elif op == 13 or op == 15:  # LOG / LOGP
                    if va <= 0.0:
                        err = 2 if op == 13 else 6
                        break
                    v = log(va)
                    c1 = 1.0 / va
                    c2 = -c1 * c1
                elif op == 14:  # SQRT
                    if va < 0.0:
                        err = 3
                        break
                    if va == 0.0 and mode >= 1:
                        err = 1
                        break
                    v = sqrt(va)
                    c1 = 0.5 / v
                    c2 = -0.5 * c1 / va
                else:
                    err = -1
                    break
                vals[k] = v
                if mode >= 1:
                    for i in range(nv):
                        grads[k, i] = c1 * grads[a, i]
                if mode >= 2:
                    for i in range(nv):
                        for j in range(nv):
                            hesss[k, i, j] = c1 * hesss[a, i, j] + c2 * (grads[a, i] * grads[a, j])

            if not isfinite(vals[k]):
                err = 5
                break

    if err == -1:
        raise ValueError("unknown opcode")
    if err:
        return err, k, 0.0, None, None

    cdef int root = n - 1
    g = grads_arr[root].copy() if mode >= 1 else None
    h = hesss_arr[root].copy() if mode >= 2 else None
    return 0, root, float(vals[root]), g, h

# cython: language_level=3
"""Compiled hot kernels. See ``_fallback.py`` for the reference semantics."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, INFINITY
from scipy.special.cython_special cimport erfcx

cnp.import_array()

cdef double SQRT_2_OVER_PI = 0.7978845608028654
cdef double INV_SQRT2 = 0.7071067811865476
cdef double TINY = 5e-324


def blip_fold(double[::1] mean, double[::1] var, X, y, double beta):
    cdef double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t n = Xv.shape[0]
    cdef Py_ssize_t d = Xv.shape[1]
    cdef Py_ssize_t r, j
    cdef double m, s2, s, t, v, w, b, nj, yr
    cdef double beta2 = beta * beta
    if n == 0:
        return
    if d != mean.shape[0] or d != var.shape[0]:
        raise ValueError("feature dimension does not match the posterior")
    with nogil:
        for r in range(n):
            m = 0.0
            s2 = beta2
            for j in range(d):
                b = Xv[r, j]
                if b != 0.0:
                    m = m + b * mean[j]
                    s2 = s2 + b * b * var[j]
            s = sqrt(s2)
            yr = yv[r]
            t = yr * m / s
            v = SQRT_2_OVER_PI / erfcx(-t * INV_SQRT2)
            if v < TINY:
                v = TINY
            w = v * (v + t)
            if w < TINY:
                w = TINY
            for j in range(d):
                b = Xv[r, j]
                if b != 0.0:
                    nj = var[j]
                    mean[j] = mean[j] + yr * b * (nj / s) * v
                    var[j] = nj * (1.0 - (b * b * nj / s2) * w)


def q_fold(double[:, :, :, ::1] Q, feasible, page, state, ctx, action, reward, terminal,
           double lr, double gamma):
    cdef cnp.uint8_t[:, :, ::1] feas = np.ascontiguousarray(feasible, dtype=np.uint8)
    cdef long[::1] pg = np.ascontiguousarray(page, dtype=np.int64)
    cdef long[::1] st = np.ascontiguousarray(state, dtype=np.int64)
    cdef long[::1] cx = np.ascontiguousarray(ctx, dtype=np.int64)
    cdef long[::1] ac = np.ascontiguousarray(action, dtype=np.int64)
    cdef double[::1] rw = np.ascontiguousarray(reward, dtype=np.float64)
    cdef cnp.uint8_t[::1] tm = np.ascontiguousarray(terminal, dtype=np.uint8)
    cdef Py_ssize_t n = pg.shape[0]
    cdef Py_ssize_t n_act = Q.shape[3]
    cdef Py_ssize_t k, a2, i, s, c, a, ns
    cdef double target, best, old
    with nogil:
        for k in range(n):
            i = pg[k]
            s = st[k]
            c = cx[k]
            a = ac[k]
            target = rw[k]
            if not tm[k]:
                ns = a + 1
                best = -INFINITY
                for a2 in range(n_act):
                    if feas[i + 1, ns, a2] and Q[i + 1, ns, c, a2] > best:
                        best = Q[i + 1, ns, c, a2]
                target = target + gamma * best
            old = Q[i, s, c, a]
            Q[i, s, c, a] = old + lr * (target - old)

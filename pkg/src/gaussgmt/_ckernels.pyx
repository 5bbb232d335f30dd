# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Mehler-kernel transport of weighted point sets."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, INFINITY

cnp.import_array()


def transport(const double[:, ::1] X, const double[:, ::1] P, const double[:, ::1] N,
              const double[::1] W, double decay, double var):
    """Log-scaled sums ``sum_i w_i K(x, p_i)`` and ``sum_i w_i nu_i K(x, p_i)``.

    ``decay = exp(-t)``, ``var = 1 - exp(-2t)``.  Returns ``(log_scale, S, V)``
    with the true sums equal to ``exp(log_scale) * S`` and ``exp(log_scale) * V``.
    """
    cdef Py_ssize_t n = X.shape[0], m = P.shape[0], k = X.shape[1]
    cdef Py_ssize_t i, j, c
    cdef double[::1] logw = np.empty(m)
    cdef double[::1] pp = np.empty(m)
    cdef double[::1] a = np.empty(m)
    out_log = np.empty(n)
    out_s = np.empty(n)
    out_v = np.zeros((n, k))
    cdef double[::1] L = out_log
    cdef double[::1] S = out_s
    cdef double[:, ::1] V = out_v
    cdef double inv = 1.0 / (2.0 * var)
    cdef double d2 = decay * decay
    cdef double xx, xp, top, e, acc
    with nogil:
        for j in range(m):
            logw[j] = log(W[j]) if W[j] > 0 else -INFINITY
            acc = 0.0
            for c in range(k):
                acc = acc + P[j, c] * P[j, c]
            pp[j] = acc
        for i in range(n):
            xx = 0.0
            for c in range(k):
                xx = xx + X[i, c] * X[i, c]
            top = -INFINITY
            for j in range(m):
                xp = 0.0
                for c in range(k):
                    xp = xp + X[i, c] * P[j, c]
                a[j] = logw[j] + (2.0 * decay * xp - d2 * pp[j]) * inv
                if a[j] > top:
                    top = a[j]
            acc = 0.0
            for j in range(m):
                if a[j] == -INFINITY:
                    continue
                e = exp(a[j] - top)
                acc = acc + e
                for c in range(k):
                    V[i, c] = V[i, c] + e * N[j, c]
            S[i] = acc
            L[i] = top - d2 * xx * inv - 0.5 * k * log(var)
    return out_log, out_s, out_v

"""Numpy implementation of the transport kernel (same contract as the compiled one)."""

import numpy as np

BLOCK = 2048


def transport(X, P, N, W, decay, var):
    X = np.ascontiguousarray(X, float)
    P = np.ascontiguousarray(P, float)
    N = np.ascontiguousarray(N, float)
    W = np.ascontiguousarray(W, float)
    n, k = X.shape
    inv = 1.0 / (2.0 * var)
    d2 = decay * decay
    with np.errstate(divide="ignore"):
        logw = np.log(W)
    pp = np.sum(P * P, axis=1)
    base = logw - d2 * pp * inv
    out_log = np.empty(n)
    out_s = np.empty(n)
    out_v = np.empty((n, k))
    for lo in range(0, n, BLOCK):
        xb = X[lo:lo + BLOCK]
        a = base + (2.0 * decay * inv) * (xb @ P.T)
        top = np.max(a, axis=1, keepdims=True)
        e = np.exp(a - top)
        out_s[lo:lo + BLOCK] = np.sum(e, axis=1)
        out_v[lo:lo + BLOCK] = e @ N
        xx = np.sum(xb * xb, axis=1)
        out_log[lo:lo + BLOCK] = top[:, 0] - d2 * xx * inv - 0.5 * k * np.log(var)
    return out_log, out_s, out_v

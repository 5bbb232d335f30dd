import math
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaussgmt import _kernels_py, kernels

ckernels = pytest.importorskip("gaussgmt._ckernels")


def _inputs(seed, n=40, m=300, k=3):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, k)) * 2
    P = rng.normal(size=(m, k))
    N = rng.normal(size=(m, k))
    N /= np.linalg.norm(N, axis=1, keepdims=True)
    W = rng.uniform(0, 1, m)
    W[::17] = 0.0
    return X, P, N, W


def _brute(X, P, N, W, decay, var):
    # density of N(decay p, var I) with respect to the standard Gaussian
    d2 = ((X[:, None, :] - decay * P[None, :, :]) ** 2).sum(axis=2)
    xx = (X * X).sum(axis=1)[:, None]
    K = W[None, :] * np.exp(-d2 / (2 * var) + xx / 2) / var ** (X.shape[1] / 2)
    return K.sum(axis=1), K @ N


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.05, 3.0), st.integers(1, 4))
def test_backends_agree(seed, t, k):
    X, P, N, W = _inputs(seed, k=k)
    decay, var = math.exp(-t), -math.expm1(-2 * t)
    a = _kernels_py.transport(X, P, N, W, decay, var)
    b = ckernels.transport(X, P, N, W, decay, var)
    for u, v in zip(a, b):
        assert np.allclose(u, v, rtol=1e-12, atol=1e-14)


def test_transport_matches_direct_sum():
    X, P, N, W = _inputs(3, k=2)
    t = 0.4
    decay, var = math.exp(-t), -math.expm1(-2 * t)
    S, V = _brute(X, P, N, W, decay, var)
    for impl in (_kernels_py.transport, ckernels.transport):
        log_scale, s, v = impl(X, P, N, W, decay, var)
        assert np.allclose(np.exp(log_scale) * s, S, rtol=1e-12)
        assert np.allclose(np.exp(log_scale)[:, None] * v, V, rtol=1e-11, atol=1e-300)


def test_log_scaling_survives_underflow():
    X, P, N, W = _inputs(4, k=2)
    X = X + 40.0
    decay, var = math.exp(-1e-4), -math.expm1(-2e-4)
    for impl in (_kernels_py.transport, ckernels.transport):
        log_scale, s, _ = impl(X, P, N, W, decay, var)
        assert np.all(np.isfinite(log_scale)) and np.all(s >= 1.0 - 1e-12)


def test_backend_selection():
    assert kernels.BACKEND == "cython"
    env = dict(os.environ, GAUSSGMT_PURE="1")
    cp = subprocess.run([sys.executable, "-c", "from gaussgmt import kernels; print(kernels.BACKEND)"],
                        capture_output=True, text=True, env=env)
    assert cp.stdout.strip() == "python"

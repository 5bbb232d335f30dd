"""Compiled vs numpy transport kernel.

    python3 benchmarks/bench_kernels.py [--points 2000] [--mesh 4000] [--repeat 5]

Prints the best-of-``repeat`` time of each backend for a few mesh
dimensions, the speedup, and the largest relative disagreement.
"""

import argparse
import math
import timeit

import numpy as np

from gaussgmt import _kernels_py

try:
    from gaussgmt import _ckernels
except ImportError:
    _ckernels = None


def make_inputs(n, m, k, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, k))
    P = rng.normal(size=(m, k))
    N = rng.normal(size=(m, k))
    N /= np.linalg.norm(N, axis=1, keepdims=True)
    W = rng.uniform(0.0, 1.0, m) / m
    return X, P, N, W


def best_time(fn, args, repeat):
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--points", type=int, default=2000)
    p.add_argument("--mesh", type=int, default=4000)
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--t", type=float, default=0.01)
    args = p.parse_args(argv)
    if _ckernels is None:
        raise SystemExit("compiled extension not built; run `pip install --no-build-isolation -e .`")
    decay, var = math.exp(-args.t), -math.expm1(-2 * args.t)
    print(f"points={args.points} mesh={args.mesh} t={args.t} repeat={args.repeat}")
    print(f"{'dim':>4} {'numpy [s]':>11} {'cython [s]':>11} {'speedup':>8} {'max rel diff':>13}")
    for k in (1, 2, 3):
        data = (*make_inputs(args.points, args.mesh, k), decay, var)
        tp = best_time(_kernels_py.transport, data, args.repeat)
        tc = best_time(_ckernels.transport, data, args.repeat)
        a, b = _kernels_py.transport(*data), _ckernels.transport(*data)
        sa, sb = np.exp(a[0]) * a[1], np.exp(b[0]) * b[1]
        diff = float(np.max(np.abs(sa - sb) / np.maximum(np.abs(sa), 1e-300)))
        print(f"{k:>4} {tp:>11.4f} {tc:>11.4f} {tp / tc:>8.2f} {diff:>13.2e}")


if __name__ == "__main__":
    main()

"""Gaussian spaces, normal CDF/densities, samplers and quadrature rules.

Every integral in the package bottoms out here.  Integrands are vectorized
oracles: they receive an ``(n, dim)`` array of points and return ``n`` values.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy import special

from .errors import DimensionTooLargeError, FrameNotAlignedError

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

#: samples per RNG partition; fixed so merged estimates do not depend on scheduling
CHUNK = 1 << 16

#: tensor Gauss-Hermite is refused above this dimension
GH_MAX_DIM = 6

Integrand = Callable[[np.ndarray], np.ndarray]


def worker_count() -> int:
    env = os.environ.get("GAUSSGMT_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# spaces and frames


@dataclass(frozen=True)
class GaussianSpace:
    """Product Gaussian ``N(0, diag(spectrum))`` on ``R^dim``.

    This is the truncated model of an abstract Wiener space: the Cameron-Martin
    space is ``R^dim`` with inner product ``sum h_k k_k / lambda_k``.
    """

    dim: int
    spectrum: tuple[float, ...] | None = None

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim!r}")
        object.__setattr__(self, "dim", int(self.dim))
        if self.spectrum is None:
            spec = (1.0,) * self.dim
        else:
            spec = tuple(float(v) for v in self.spectrum)
            if len(spec) == 1 and self.dim > 1:
                spec = spec * self.dim
        if len(spec) != self.dim:
            raise ValueError("spectrum length must equal dim")
        if not all(v > 0 and math.isfinite(v) for v in spec):
            raise ValueError("spectrum entries must be positive and finite")
        object.__setattr__(self, "spectrum", spec)

    @property
    def variances(self) -> np.ndarray:
        return np.asarray(self.spectrum, dtype=float)

    @property
    def stds(self) -> np.ndarray:
        return np.sqrt(self.variances)

    @property
    def is_standard(self) -> bool:
        return all(v == 1.0 for v in self.spectrum)

    def cm_inner(self, h, k) -> float:
        return float(np.sum(np.asarray(h, float) * np.asarray(k, float) / self.variances))

    def cm_norm(self, h) -> float:
        return math.sqrt(self.cm_inner(h, h))

    def pairing(self, x, h) -> np.ndarray:
        """``h_hat(x)``: the L^2(gamma) element attached to ``h``, evaluated at ``x``."""
        x = np.asarray(x, float)
        return x @ (np.asarray(h, float) / self.variances)

    def subspace(self, coords: Sequence[int]) -> "GaussianSpace":
        coords = list(coords)
        return GaussianSpace(len(coords), tuple(self.spectrum[c] for c in coords))


@dataclass(frozen=True)
class Frame:
    """Coordinate-aligned orthonormal frame spanning ``F`` inside ``R^ambient``.

    ``coords`` are 0-based ambient indices, kept in the order given.  The
    complementary coordinates ``Y`` are the remaining indices in increasing
    order; points split as ``x = (z, y)``.
    """

    coords: tuple[int, ...]
    ambient: int

    def __post_init__(self):
        coords = tuple(int(c) for c in self.coords)
        if len(set(coords)) != len(coords):
            raise ValueError("frame coordinates must be distinct")
        if any(c < 0 or c >= self.ambient for c in coords):
            raise ValueError("frame coordinate out of range")
        object.__setattr__(self, "coords", coords)

    @classmethod
    def from_vectors(cls, vectors, space: GaussianSpace | None = None) -> "Frame":
        vecs = np.atleast_2d(np.asarray(vectors, float))
        ambient = vecs.shape[1]
        space = space or GaussianSpace(ambient)
        gram = np.array([[space.cm_inner(a, b) for b in vecs] for a in vecs])
        if np.max(np.abs(gram - np.eye(len(vecs)))) > 1e-12:
            raise ValueError("frame vectors are not Cameron-Martin orthonormal")
        coords = []
        for v in vecs:
            nz = np.flatnonzero(np.abs(v) > 1e-12)
            if len(nz) != 1:
                raise FrameNotAlignedError("frame vector is not a coordinate direction")
            coords.append(int(nz[0]))
        return cls(tuple(coords), ambient)

    @property
    def dim(self) -> int:
        return len(self.coords)

    @property
    def vectors(self) -> np.ndarray:
        out = np.zeros((self.dim, self.ambient))
        out[np.arange(self.dim), list(self.coords)] = 1.0
        return out

    @property
    def complement(self) -> tuple[int, ...]:
        s = set(self.coords)
        return tuple(i for i in range(self.ambient) if i not in s)

    def complement_frame(self) -> "Frame":
        return Frame(self.complement, self.ambient)

    def split(self, x):
        x = np.asarray(x, float)
        return x[..., list(self.coords)], x[..., list(self.complement)]

    def assemble(self, z, y) -> np.ndarray:
        z = np.asarray(z, float)
        y = np.asarray(y, float)
        if z.shape[-1] != self.dim or y.shape[-1] != self.ambient - self.dim:
            raise ValueError("component lengths do not match the frame")
        shape = np.broadcast_shapes(z.shape[:-1], y.shape[:-1]) + (self.ambient,)
        out = np.empty(shape)
        out[..., list(self.coords)] = z
        out[..., list(self.complement)] = y
        return out

    def project(self, v) -> np.ndarray:
        """Orthogonal projection ``pi_F`` of ambient vectors (standard CM metric)."""
        v = np.asarray(v, float)
        out = np.zeros_like(v)
        out[..., list(self.coords)] = v[..., list(self.coords)]
        return out


# ---------------------------------------------------------------------------
# estimates and seeds

METHODS = ("closed_form", "quadrature", "monte_carlo")


@dataclass(frozen=True)
class Estimate:
    value: float
    error: float = 0.0
    method: str = "closed_form"
    samples: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method tag {self.method!r}")
        if not self.error >= 0:
            raise ValueError("error must be nonnegative")
        if self.method == "closed_form" and self.error != 0:
            raise ValueError("closed-form estimates carry zero error")
        object.__setattr__(self, "value", float(self.value))
        object.__setattr__(self, "error", float(self.error))
        object.__setattr__(self, "samples", int(self.samples))

    def __float__(self):
        return self.value

    def as_dict(self) -> dict:
        return {"value": self.value, "error": self.error, "method": self.method, "samples": self.samples}


@dataclass(frozen=True)
class RngSeed:
    """Counter-based seed: Philox keyed by ``(seed, stream, partition)``."""

    seed: int
    stream: int = 0

    def __post_init__(self):
        for name in ("seed", "stream"):
            v = getattr(self, name)
            if int(v) != v or not 0 <= v < 2**64:
                raise ValueError(f"{name} must be a 64-bit unsigned integer")
            object.__setattr__(self, name, int(v))

    def generator(self, partition: int = 0) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream, int(partition)))
        return np.random.Generator(np.random.Philox(ss))

    def child(self, stream: int) -> "RngSeed":
        """Independent seed for a sub-experiment; mixes the stream id into the stream."""
        mixed = np.random.SeedSequence(self.seed, spawn_key=(self.stream, 2**32 + int(stream)))
        return RngSeed(self.seed, int(mixed.generate_state(1, np.uint64)[0]))


# ---------------------------------------------------------------------------
# normal distribution


def std_normal_cdf(x):
    """Standard normal CDF via ``erfc``; accurate to ~1e-16 absolute."""
    if np.ndim(x) == 0:
        return 0.5 * math.erfc(-float(x) / math.sqrt(2.0))
    return 0.5 * special.erfc(-np.asarray(x, float) / math.sqrt(2.0))


def std_normal_pdf(x):
    return np.exp(-0.5 * np.square(x)) * INV_SQRT_2PI


def log_gaussian_density(space: GaussianSpace, point) -> np.ndarray:
    """Log of the product Gaussian density; ``point`` may be ``(dim,)`` or ``(n, dim)``."""
    x = np.asarray(point, float)
    if x.shape[-1] != space.dim:
        raise ValueError(f"point has length {x.shape[-1]}, space has dim {space.dim}")
    lam = space.variances
    const = -space.dim * LOG_SQRT_2PI - 0.5 * float(np.sum(np.log(lam)))
    return const - 0.5 * np.sum(x * x / lam, axis=-1)


def gaussian_density(space: GaussianSpace, point):
    """Product Gaussian density, always computed in the log domain.

    Far points underflow to exactly 0.0; the result is never NaN for finite input.
    """
    out = np.exp(log_gaussian_density(space, point))
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# sampling and Monte Carlo


def _partition_sizes(n: int) -> list[int]:
    full, rest = divmod(n, CHUNK)
    return [CHUNK] * full + ([rest] if rest else [])


def sample_normal(space: GaussianSpace, n: int, seed: RngSeed, coords=None) -> np.ndarray:
    """Deterministic ``(n, k)`` draw from gamma restricted to ``coords`` (default all)."""
    coords = range(space.dim) if coords is None else coords
    std = space.stds[list(coords)]
    k = len(std)
    parts = [seed.generator(i).standard_normal((m, k)) for i, m in enumerate(_partition_sizes(n))]
    if not parts:
        return np.empty((0, k))
    return np.concatenate(parts) * std


def _chunk_moments(values: np.ndarray):
    m = len(values)
    mean = float(np.mean(values))
    m2 = float(np.sum(np.square(values - mean)))
    return m, mean, m2


def _merge_moments(parts):
    n, mean, m2 = 0, 0.0, 0.0
    for m, mu, q in parts:
        if m == 0:
            continue
        tot = n + m
        delta = mu - mean
        mean += delta * m / tot
        m2 += q + delta * delta * n * m / tot
        n = tot
    return n, mean, m2


def mc_estimate(values_by_partition) -> Estimate:
    n, mean, m2 = _merge_moments(values_by_partition)
    if n < 2:
        raise ValueError("Monte Carlo needs at least two samples")
    var = m2 / (n - 1)
    return Estimate(mean, math.sqrt(max(var, 0.0) / n), "monte_carlo", n)


def mc_integrate(space: GaussianSpace, integrand: Integrand, n: int, seed: RngSeed,
                 coords=None) -> Estimate:
    """Sample mean of ``integrand`` under gamma with standard error.

    Samples are drawn per fixed-size partition from the stream
    ``(seed, stream, partition)``; partition moments are merged in index
    order, so the result is bitwise stable across thread counts.  When
    ``coords`` is given, only those coordinates are sampled and the integrand
    receives a ``(m, len(coords))`` array.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    coords = list(range(space.dim)) if coords is None else list(coords)
    std = space.stds[coords]
    sizes = _partition_sizes(n)

    def work(i):
        pts = seed.generator(i).standard_normal((sizes[i], len(coords))) * std
        vals = np.asarray(integrand(pts), float).reshape(-1)
        return _chunk_moments(vals)

    workers = min(worker_count(), len(sizes))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(work, range(len(sizes))))
    else:
        parts = [work(i) for i in range(len(sizes))]
    return mc_estimate(parts)


# ---------------------------------------------------------------------------
# quadrature rules


@lru_cache(maxsize=256)
def hermite_rule(order: int):
    """Gauss-Hermite rule for the standard normal weight (weights sum to 1)."""
    x, w = np.polynomial.hermite_e.hermegauss(order)
    w = w / math.sqrt(2.0 * math.pi)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@lru_cache(maxsize=256)
def legendre_rule(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def legendre_on(a, b, order: int):
    """Gauss-Legendre nodes/weights on ``[a, b]`` (vectorized over ``a``, ``b``)."""
    x, w = legendre_rule(order)
    a = np.asarray(a, float)[..., None]
    b = np.asarray(b, float)[..., None]
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


#: normal mass beyond this many standard deviations is below 1e-23
TAIL = 10.0


def phi_rule(breaks=(), order: int = 24, lo: float = -TAIL, hi: float = TAIL):
    """Piecewise Gauss-Legendre rule for ``int g(v) phi(v) dv``.

    The interval ``[lo, hi]`` is split at every break inside it, so integrands
    that are smooth between breaks (indicators, section perimeters) are
    integrated to near machine precision.  Weights include ``phi``.
    """
    cuts = sorted({float(b) for b in breaks if lo < b < hi})
    edges = [lo, *cuts, hi]
    xs, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        if b - a <= 0:
            continue
        x, w = legendre_on(a, b, order)
        xs.append(x)
        ws.append(w * std_normal_pdf(x))
    return np.concatenate(xs), np.concatenate(ws)


def tensor_rule(rules):
    """Tensor product of 1-d ``(nodes, weights)`` rules."""
    grids = np.meshgrid(*[r[0] for r in rules], indexing="ij")
    wgrids = np.meshgrid(*[r[1] for r in rules], indexing="ij")
    pts = np.stack([g.reshape(-1) for g in grids], axis=-1)
    w = np.prod(np.stack([g.reshape(-1) for g in wgrids], axis=-1), axis=-1)
    return pts, w


def _gh_value(space: GaussianSpace, integrand: Integrand, order: int) -> float:
    x, w = hermite_rule(order)
    pts, wts = tensor_rule([(x, w)] * space.dim)
    vals = np.asarray(integrand(pts * space.stds), float).reshape(-1)
    return float(np.dot(wts, vals))


def gh_integrate(space: GaussianSpace, integrand: Integrand, order: int) -> Estimate:
    """Tensor Gauss-Hermite integral against gamma.

    Exact for polynomials of degree ``<= 2*order - 1`` per coordinate.  The
    error field is the heuristic ``|Q(order) - Q(order - 1)|``.
    """
    if space.dim > GH_MAX_DIM:
        raise DimensionTooLargeError(
            f"tensor Gauss-Hermite limited to dim <= {GH_MAX_DIM}; use mc_integrate")
    if order < 2:
        raise ValueError("order must be at least 2")
    q = _gh_value(space, integrand, order)
    q1 = _gh_value(space, integrand, order - 1)
    return Estimate(q, abs(q - q1), "quadrature", order)


def sqrt_one_minus_exp(t):
    """``sqrt(1 - exp(-2t))`` without cancellation for tiny ``t``."""
    return np.sqrt(-np.expm1(-2.0 * np.asarray(t, float)))

"""Ornstein-Uhlenbeck semigroup: Mehler's formula, its dual on surface meshes,
the factorization over a coordinate splitting, and the Lipschitz-graph bound.

Everything here reduces to one primitive, ``E[f(X)]`` for a product Gaussian
``X ~ N(mean, diag(scale^2))``:  ``T_t f(x)`` uses ``mean = e^{-t} x`` and
``scale = sqrt(1 - e^{-2t}) sqrt(lambda)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, special

from . import kernels
from .core import (GH_MAX_DIM, Estimate, Frame, GaussianSpace, RngSeed, _chunk_moments,
                   _partition_sizes, hermite_rule, log_gaussian_density, mc_estimate,
                   sqrt_one_minus_exp, tensor_rule)
from .errors import EmptyMeshError, MeshNotAGraphError
from .mesh import SurfaceMesh
from .quadrature import (DEFAULT_ORDER, ball_probability, interval_mass, is_closed_form,
                         iterated_integral, set_probability)
from .sets import (Ball, Box, Complement, CylinderLift, DisjointUnion, Halfspace, SetModel,
                   Trivial, reduce_to_support, section_coords)

MODES = ("auto", "closed_form", "quadrature", "monte_carlo")


@dataclass(frozen=True)
class EvalPolicy:
    """How expectations are computed.

    ``auto`` uses closed forms where they exist, sectioned quadrature when
    the effective dimension is at most ``quad_max_dim``, Monte Carlo
    otherwise.  ``grid_nodes`` sets the per-axis node count when a smooth
    field is integrated over space (see ``perimeter.smoothed_tv``).
    """

    mode: str = "auto"
    mc_samples: int = 100_000
    gh_order: int = DEFAULT_ORDER
    grid_nodes: int = 160
    quad_max_dim: int = 4

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.mc_samples < 2 or self.gh_order < 3 or self.grid_nodes < 8:
            raise ValueError("policy counts are too small")


DEFAULT_POLICY = EvalPolicy()


def _check_t(t):
    if not t > 0 or not math.isfinite(t):
        raise ValueError("t must be positive and finite; T_0 is the identity, evaluate directly")


# ---------------------------------------------------------------------------
# Gaussian expectations of sets and oracles


def _closed_prob(E, M, s):
    """Vectorized probabilities for closed-form sets; ``M`` has one mean per row."""
    if isinstance(E, Trivial):
        return np.full(len(M), 1.0 if E.full else 0.0)
    if isinstance(E, Complement):
        return 1.0 - _closed_prob(E.inner, M, s)
    if isinstance(E, CylinderLift):
        idx = list(E.coords)
        return _closed_prob(E.base, M[:, idx], s[idx])
    if isinstance(E, DisjointUnion):
        a = _closed_prob(E.left, M[:, : E.left.dim], s[: E.left.dim])
        b = _closed_prob(E.right, M[:, : E.right.dim], s[: E.right.dim])
        return a + b
    if isinstance(E, Halfspace):
        h = E.direction
        spread = math.sqrt(float(np.sum((h * s[: E.dim]) ** 2)))
        return special.ndtr((E.offset - M[:, : E.dim] @ h) / spread)
    if isinstance(E, Box):
        k = E.dim
        lo = (E.lower - M[:, :k]) / s[:k]
        hi = (E.upper - M[:, :k]) / s[:k]
        return np.prod(interval_mass(lo, hi), axis=1)
    raise TypeError(f"{type(E).__name__} has no closed form")


def _effective_dim(target, dim):
    if isinstance(target, SetModel):
        return len(target.support())
    return dim


def _resolve_mode(target, policy, dim):
    mode = policy.mode
    if mode == "auto":
        if isinstance(target, SetModel) and is_closed_form(target):
            return "closed_form"
        if _effective_dim(target, dim) <= policy.quad_max_dim:
            return "quadrature"
        return "monte_carlo"
    if mode == "closed_form" and not (isinstance(target, SetModel) and is_closed_form(target)):
        raise ValueError("no closed form is available for this target")
    return mode


def _set_quadrature(E, M, s, order):
    if isinstance(E, Ball) and np.all(s[: E.dim] == s[0]):
        k = E.dim
        v = ball_probability(E.center, E.radius, M[:, :k], s[0], 2 * order)
        v1 = ball_probability(E.center, E.radius, M[:, :k], s[0], 2 * order - 1)
        return np.clip(v, 0, 1), np.abs(v - v1)
    vals = np.array([set_probability(E, m, s, order) for m in M])
    vals1 = np.array([set_probability(E, m, s, order - 1) for m in M])
    return vals, np.abs(vals - vals1)


def _oracle_quadrature(f, M, s, order):
    d = M.shape[1]
    if d > GH_MAX_DIM:
        raise ValueError(f"tensor quadrature is limited to dim <= {GH_MAX_DIM}")

    def q(n):
        x, w = hermite_rule(n)
        Y, W = tensor_rule([(x, w)] * d)
        Y = Y * s
        out = np.empty(len(M))
        for i, m in enumerate(M):
            out[i] = np.dot(W, np.asarray(f(m + Y), float).reshape(-1))
        return out

    v = q(order)
    return v, np.abs(v - q(order - 1))


def _mc(target, M, s, n, seed):
    """Common-random-number Monte Carlo for every row of ``M``."""
    if isinstance(target, SetModel):
        R, sup = reduce_to_support(target)
        if not sup:
            val = 1.0 if R.full else 0.0
            return np.full(len(M), val), np.zeros(len(M))
        cols = list(sup)
        fn = R.contains
    else:
        cols = list(range(M.shape[1]))
        fn = target
    sizes = _partition_sizes(n)
    vals, errs = np.empty(len(M)), np.empty(len(M))
    parts = [[] for _ in M]
    for p, size in enumerate(sizes):
        Z = seed.generator(p).standard_normal((size, len(cols))) * s[cols]
        for i, m in enumerate(M):
            y = np.asarray(fn(m[cols] + Z), float).reshape(-1)
            parts[i].append(_chunk_moments(y))
    for i in range(len(M)):
        est = mc_estimate(parts[i])
        vals[i], errs[i] = est.value, est.error
    return vals, errs


def gaussian_expectation(target, means, scales, policy: EvalPolicy = DEFAULT_POLICY,
                         seed: RngSeed | None = None):
    """``E[target(X)]`` for ``X ~ N(m, diag(scales^2))``, one mean ``m`` per row.

    ``target`` is a :class:`SetModel` (indicator) or a vectorized oracle on
    ``(n, d)`` arrays.  Returns ``(values, errors, method, samples)``.
    """
    M = np.atleast_2d(np.asarray(means, float))
    s = np.broadcast_to(np.asarray(scales, float), (M.shape[1],)).astype(float)
    mode = _resolve_mode(target, policy, M.shape[1])
    if mode == "closed_form":
        return np.clip(_closed_prob(target, M, s), 0, 1), np.zeros(len(M)), mode, 0
    if mode == "quadrature":
        if isinstance(target, SetModel):
            v, e = _set_quadrature(target, M, s, policy.gh_order)
        else:
            v, e = _oracle_quadrature(target, M, s, policy.gh_order)
        return _clamp(target, v), e, mode, policy.gh_order
    seed = seed or RngSeed(0)
    v, e = _mc(target, M, s, policy.mc_samples, seed)
    return _clamp(target, v), e, mode, policy.mc_samples


def _clamp(target, v):
    if isinstance(target, SetModel):
        return np.clip(v, 0.0, 1.0)
    bounds = getattr(target, "bounds", None)
    if bounds is not None:
        return np.clip(v, bounds[0], bounds[1])
    return v


# ---------------------------------------------------------------------------
# Mehler's formula


def mehler_batch(E_or_f, t: float, X, space: GaussianSpace, policy: EvalPolicy = DEFAULT_POLICY,
                 seed: RngSeed | None = None):
    """``T_t f`` at every row of ``X``; returns ``(values, errors, method, samples)``."""
    _check_t(t)
    X = np.atleast_2d(np.asarray(X, float))
    if X.shape[1] != space.dim:
        raise ValueError(f"points must have {space.dim} coordinates")
    scale = sqrt_one_minus_exp(t) * space.stds
    return gaussian_expectation(E_or_f, math.exp(-t) * X, scale, policy, seed)


def mehler_apply(E_or_f, t: float, x, space: GaussianSpace, policy: EvalPolicy = DEFAULT_POLICY,
                 seed: RngSeed | None = None) -> Estimate:
    """``T_t f(x) = int f(e^{-t} x + sqrt(1 - e^{-2t}) y) d gamma(y)``."""
    v, e, mode, n = mehler_batch(E_or_f, t, np.asarray(x, float)[None, :], space, policy, seed)
    return Estimate(v[0], e[0], mode, n)


def halfspace_closed_form(c: float, a, t: float):
    """``T_t chi_{<x,h> <= c}`` at points with ``<x,h> = a``."""
    _check_t(t)
    return special.ndtr((c - math.exp(-t) * np.asarray(a, float)) / float(sqrt_one_minus_exp(t)))


# ---------------------------------------------------------------------------
# dual semigroup on meshes


def kernel_transport(mesh: SurfaceMesh, t: float, X):
    """Mehler-kernel sums ``sum_i w_i K_t(x, p_i)`` and ``sum_i w_i nu_i K_t(x, p_i)``.

    ``K_t`` is the density of ``T_t^* delta_p`` with respect to gamma.  Only
    the mesh coordinates of ``X`` matter: in the remaining coordinates the
    mesh is a product with gamma, whose transport density is 1.  Returns
    ``(log_scale, S, V)`` with ``V`` in mesh coordinates.
    """
    _check_t(t)
    X = np.atleast_2d(np.asarray(X, float))
    Xc = np.ascontiguousarray(X[:, list(mesh.coords)])
    return kernels.transport(Xc, np.ascontiguousarray(mesh.points), np.ascontiguousarray(mesh.normals),
                             np.ascontiguousarray(mesh.weights), math.exp(-t), float(-math.expm1(-2 * t)))


def dual_density(mesh: SurfaceMesh, t: float, X, vector: bool = False):
    """Density of ``T_t^* mu`` (or of ``T_t^*(nu mu)`` when ``vector``) w.r.t. gamma.

    Underflows to 0 far from the mesh.  Vector densities are ambient vectors.
    """
    if len(mesh) == 0:
        raise EmptyMeshError("transport of an empty mesh")
    log_scale, S, V = kernel_transport(mesh, t, X)
    with np.errstate(over="ignore", under="ignore"):
        scale = np.exp(log_scale)
    if not vector:
        return scale * S
    out = np.zeros((len(S), mesh.ambient))
    out[:, list(mesh.coords)] = scale[:, None] * V
    return out


def dual_apply(mesh: SurfaceMesh, t: float, phi, space: GaussianSpace,
               policy: EvalPolicy = DEFAULT_POLICY, seed: RngSeed | None = None,
               vector: bool = False):
    """``<T_t^* mu, phi> = int T_t phi d mu`` for the mesh measure ``mu``.

    With ``vector=True`` the measure is ``nu mu`` and a tuple of per-coordinate
    Estimates is returned.  Coordinates outside the mesh are integrated
    against gamma, which is how the mesh measure extends to the ambient space.
    """
    _check_t(t)
    if len(mesh) == 0:
        raise EmptyMeshError("dual_apply needs a nonempty mesh")
    if not space.is_standard:
        raise ValueError("meshes live in the standard Gaussian space")
    sigma = float(sqrt_one_minus_exp(t))
    M = math.exp(-t) * mesh.full_points()
    scale = np.ones(mesh.ambient)
    scale[list(mesh.coords)] = sigma
    target_dim = phi.dim if isinstance(phi, SetModel) else mesh.ambient
    vals, errs, mode, n = gaussian_expectation(phi, M[:, :target_dim], scale[:target_dim], policy, seed)
    w = mesh.weights
    if not vector:
        return Estimate(float(np.dot(w, vals)), float(np.dot(w, errs)), mode, n)
    N = mesh.full_normals()
    return tuple(Estimate(float(np.dot(w * N[:, j], vals)), float(np.dot(w * np.abs(N[:, j]), errs)),
                          mode, n) for j in range(mesh.ambient))


# ---------------------------------------------------------------------------
# factorization


def factorization_eval(f, F: Frame, t: float, z, y, policy: EvalPolicy = EvalPolicy(mode="quadrature"),
                       space: GaussianSpace | None = None):
    """``(direct, factored)`` evaluations of ``T_t f`` at ``x = (z, y)``.

    ``factored`` computes ``T_t^Y(w -> T_t^F f(., w)(z))(y)`` with nested
    integrations; for sets the outer rule is split at the breakpoints of the
    sections so both sides converge to rounding.
    """
    _check_t(t)
    space = space or GaussianSpace(F.ambient)
    z = np.atleast_1d(np.asarray(z, float))
    y = np.atleast_1d(np.asarray(y, float))
    x = F.assemble(z, y)
    direct = mehler_apply(f, t, x, space, policy)
    decay = math.exp(-t)
    sig = float(sqrt_one_minus_exp(t))
    std = space.stds
    fc, yc = list(F.coords), list(F.complement)
    order = policy.gh_order

    if isinstance(f, SetModel):
        zmean = decay * z
        zscale = sig * std[fc]

        def inner(fixed, n=order):
            sec = section_coords(f, {c: v for c, v in fixed.items() if c < f.dim}, fc)
            return set_probability(sec, zmean, zscale, n)

        relevant = [c for c in yc if c < f.dim and c in f.support()]
        means = {c: decay * y[yc.index(c)] for c in relevant}
        stds = {c: sig * std[c] for c in relevant}
        base = {c: 0.0 for c in yc if c not in relevant}
        val = iterated_integral(inner, relevant, [f], stds, order, base, means)
        val1 = iterated_integral(lambda d: inner(d, order - 1), relevant, [f], stds, order - 1, base, means)
    else:
        def run(n):
            xz, wz = hermite_rule(n)
            Zs, Wz = tensor_rule([(xz, wz)] * len(fc)) if fc else (np.zeros((1, 0)), np.ones(1))
            Ys, Wy = tensor_rule([(xz, wz)] * len(yc)) if yc else (np.zeros((1, 0)), np.ones(1))
            total = 0.0
            for yv, wy in zip(Ys, Wy):
                w_pt = decay * y + sig * std[yc] * yv
                pts = F.assemble(decay * z + sig * std[fc] * Zs, np.broadcast_to(w_pt, (len(Zs), len(yc))))
                total += wy * float(np.dot(Wz, np.asarray(f(pts), float).reshape(-1)))
            return total

        val, val1 = run(order), run(order - 1)
    factored = Estimate(_clamp(f, np.array([val]))[0], abs(val - val1), "quadrature", order)
    return direct, factored


# ---------------------------------------------------------------------------
# Lipschitz-graph bound


def _log_omega_tail(m: int, s: float) -> float:
    """``log int_{s/4}^inf exp(s^2/100 - tau^2/4) tau^(m-1) d tau``."""
    a = s / 4.0
    peak = max(a, math.sqrt(2.0 * (m - 1)))

    def g(tau):
        return s * s / 100.0 - tau * tau / 4.0 + (m - 1) * math.log(tau) if tau > 0 else -math.inf

    g0 = g(peak) if peak > 0 else s * s / 100.0
    val, _ = integrate.quad(lambda tau: math.exp(g(tau) - g0) if tau > 0 else 0.0,
                            a, math.inf, epsabs=0.0, epsrel=1e-12, limit=200)
    return g0 + math.log(val) if val > 0 else -math.inf


def omega_bound(m: int, R: float, s: float) -> float:
    """The explicit function ``Omega_{m,R}(s)`` bounding transported graph measures."""
    if m < 2 or not R > 0 or s < 0:
        raise ValueError("need m >= 2, R > 0, s >= 0")
    omega_m = math.pi ** (m / 2) / math.gamma(m / 2 + 1)
    log_coef = math.log(m * omega_m) - 0.5 * (m - 1) * math.log(2 * math.pi) + R * R
    lt1 = log_coef + _log_omega_tail(m, s)
    lt2 = R * R - s * s / 20.0
    top = max(lt1, lt2)
    if top > 1.0:
        return 1.0
    return min(1.0, math.exp(lt1) + math.exp(lt2))


@dataclass
class GraphBoundResult:
    t: float
    ok: np.ndarray
    margins: np.ndarray
    lhs: np.ndarray
    bound: np.ndarray
    distance: np.ndarray = field(repr=False)

    @property
    def all_ok(self) -> bool:
        return bool(np.all(self.ok))


#: default upper limit for the time parameter of the graph bound
T_BAR = 1e-2


def graph_bound_check(mesh: SurfaceMesh, t: float, x_batch, t_bar: float = T_BAR) -> GraphBoundResult:
    """Check ``sqrt(t) T_t^* (G_m H^{m-1} | Gamma) <= sqrt((1+l^2)/(2 pi)) Omega(dist/sqrt t) gamma``.

    Both sides are reported as Lebesgue densities at each point; ``margins``
    is bound minus left side.
    """
    _check_t(t)
    if t > t_bar:
        raise ValueError(f"t = {t} exceeds t_bar = {t_bar}")
    meta = mesh.meta
    if not {"lipschitz", "radius", "distance"} <= set(meta):
        raise MeshNotAGraphError("mesh carries no Lipschitz-graph metadata")
    X = np.atleast_2d(np.asarray(x_batch, float))
    m = mesh.ambient
    ell, R = float(meta["lipschitz"]), float(meta["radius"])
    dist = np.asarray(meta["distance"](X), float)
    log_scale, S, _ = kernel_transport(mesh, t, X)
    logG = log_gaussian_density(GaussianSpace(m), X)
    with np.errstate(divide="ignore", under="ignore"):
        lhs = np.exp(0.5 * math.log(t) + log_scale + np.log(S) + logG)
        om = np.array([omega_bound(m, R, d / math.sqrt(t)) for d in dist])
        bound = math.sqrt((1 + ell * ell) / (2 * math.pi)) * om * np.exp(logG)
    margins = bound - lhs
    return GraphBoundResult(t, margins >= 0, margins, lhs, bound, dist)

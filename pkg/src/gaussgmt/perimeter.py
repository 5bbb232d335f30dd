"""Gaussian perimeter measures, section identities, the Poincare constant and
smoothed total variation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate, special

from .core import (Estimate, Frame, GaussianSpace, RngSeed, legendre_on, mc_integrate,
                   sample_normal, std_normal_pdf)
from .mesh import SurfaceMesh, boundary_mesh, mesh_once
from .quadrature import DEFAULT_ORDER, Intersection, iterated_integral
from .semigroup import DEFAULT_POLICY, EvalPolicy, dual_density, mehler_batch
from .sets import (Ball, Box, Complement, CylinderLift, Halfspace, SetModel, Trivial,
                   reduce_to_support, section_coords)

#: resolution used for meshes of sections (dimension >= 2) inside y-integrals
SECTION_RESOLUTION = 200


@dataclass
class PerimeterMeasure:
    """``|D_gamma chi_E|`` as a mesh, with the inner normal field ``nu_E``."""

    mesh: SurfaceMesh

    @property
    def total(self) -> float:
        return self.mesh.total_mass

    @property
    def normal_field(self) -> np.ndarray:
        return self.mesh.full_normals()

    @property
    def tolerance(self) -> float:
        return self.mesh.tolerance

    def mass_in(self, B: SetModel) -> float:
        return self.mesh.mass_in(B)

    def vector_total(self) -> np.ndarray:
        """``D_gamma chi_E (X)`` as an ambient vector."""
        return self.mesh.weights @ self.mesh.full_normals()


def gaussian_perimeter(E: SetModel, space: GaussianSpace, resolution: int = 400,
                       restrict_to: SetModel | None = None) -> PerimeterMeasure:
    """Perimeter measure of ``E``; with ``restrict_to`` only the part inside ``B``."""
    return PerimeterMeasure(boundary_mesh(E, space, resolution, restrict_to=restrict_to))


def perimeter_closed_form(E: SetModel) -> float | None:
    """Exact ``|D_gamma chi_E|(X)`` for halfspaces, boxes and origin-centred balls.

    Complements and cylinder lifts inherit the value of their inner set;
    ``None`` when no formula applies.
    """
    if isinstance(E, (Complement,)):
        return perimeter_closed_form(E.inner)
    if isinstance(E, CylinderLift):
        return perimeter_closed_form(E.base)
    if isinstance(E, Halfspace):
        return float(std_normal_pdf(E.offset))
    if isinstance(E, Box):
        lo, hi = E.lower, E.upper
        mass = special.ndtr(hi) - special.ndtr(lo)
        dens = np.where(np.isfinite(lo), std_normal_pdf(np.where(np.isfinite(lo), lo, 0.0)), 0.0) \
            + np.where(np.isfinite(hi), std_normal_pdf(np.where(np.isfinite(hi), hi, 0.0)), 0.0)
        total = 0.0
        for i in range(len(lo)):
            total += dens[i] * float(np.prod(np.delete(mass, i)))
        return float(total)
    if isinstance(E, Ball) and not np.any(E.center):
        m, r = E.dim, E.radius
        # |S^{m-1}| r^{m-1} times the radial Gaussian density
        area = 2.0 * math.pi ** (m / 2) / math.gamma(m / 2)
        return float(area * r ** (m - 1) * (2 * math.pi) ** (-m / 2) * math.exp(-r * r / 2))
    return None


# ---------------------------------------------------------------------------
# section identities


def line_section_mass(E, B, fixed, g, coord=None, values=None):
    """Gaussian boundary mass of one-dimensional convex sections along coordinate ``g``.

    The sections pass through ``fixed``; with ``coord``/``values`` one section
    per value of that coordinate is evaluated.  Endpoints are exact; ``B``
    (if any) keeps the endpoints it contains.
    """
    dim = max(E.dim, g + 1, (B.dim if B is not None else 0))
    n = 1 if values is None else len(values)
    P = np.zeros((n, dim))
    for c, v in fixed.items():
        if c < dim:
            P[:, c] = v
    if coord is not None and coord < dim:
        P[:, coord] = values
    if g >= E.dim:  # E does not depend on the line direction: no boundary on the line
        return np.zeros(n)
    lo, hi = E.interval(P[:, : E.dim], g)
    ok = hi > lo
    total = np.zeros(n)
    for e in (lo, hi):
        good = ok & np.isfinite(e)
        if B is not None:
            Q = P.copy()
            Q[:, g] = np.where(np.isfinite(e), e, 0.0)
            good &= B.contains(Q[:, : B.dim])
        total += np.where(good, std_normal_pdf(np.where(good, e, 0.0)), 0.0)
    return total


def section_mass(E: SetModel, B: SetModel | None, fixed: dict, G: Sequence, ambient: int,
                 resolution: int = SECTION_RESOLUTION) -> float:
    """``|D_{gamma_G} chi_{E_y}|(B_y)`` for the section through the frozen coordinates."""
    G = list(G)
    if len(G) == 1 and E.convex and (B is None or B.convex):
        try:
            return float(line_section_mass(E, B, fixed, G[0])[0])
        except NotImplementedError:
            pass
    Ey = section_coords(E, {c: v for c, v in fixed.items() if c < E.dim}, G)
    By = None
    if B is not None:
        By = section_coords(B, {c: v for c, v in fixed.items() if c < B.dim}, G)
        if isinstance(By, Trivial):
            if not By.full:
                return 0.0
            By = None
    if isinstance(Ey, Trivial):
        return 0.0
    return mesh_once(Ey, len(G), resolution, By).total_mass


def _lhs_weighted(E, space, B, G, resolution):
    def one(res):
        mesh = boundary_mesh(E, space, res, restrict_to=B, allow_empty=True)
        if len(mesh) == 0:
            return 0.0
        N = mesh.full_normals()[:, list(G)]
        return float(np.dot(mesh.weights, np.linalg.norm(N, axis=1)))

    a = one(resolution)
    b = one(max(8, resolution // 2))
    return Estimate(a, abs(a - b) + 1e-12 * max(1.0, a), "quadrature", resolution)


def integrate_over_complement(E: SetModel, B: SetModel | None, G, space: GaussianSpace,
                              order: int = DEFAULT_ORDER, policy: EvalPolicy = DEFAULT_POLICY,
                              seed: RngSeed | None = None, fn=None) -> Estimate:
    """``int_Y fn(y) d gamma_Y(y)`` where ``Y`` is the complement of ``G``.

    ``fn`` defaults to the section mass of ``E`` inside ``B``.  Only the
    coordinates of ``Y`` that some set depends on are integrated; the rest
    cannot change the integrand.  Up to ``policy.quad_max_dim`` such
    coordinates use section-aware quadrature, more use Monte Carlo.
    """
    G = list(G)
    sets = [E] if B is None else [E, B, Intersection(E, B)]
    deps = set(E.support()) | (set(B.support()) if B is not None else set())
    Y = [c for c in range(space.dim) if c not in G and c in deps]
    base = {c: 0.0 for c in range(space.dim) if c not in G and c not in Y}
    coarse = fn
    section_default = None
    if fn is None:
        def fn(fixed):
            return section_mass(E, B, fixed, G, space.dim, SECTION_RESOLUTION)

        section_default = fn

        def coarse(fixed):
            return section_mass(E, B, fixed, G, space.dim, SECTION_RESOLUTION // 2)
    stds = {c: float(space.stds[c]) for c in Y}
    batch = None
    # a complement has the same boundary as the set itself
    core = E.inner if isinstance(E, Complement) else E
    if fn is section_default and len(G) == 1 and core.convex and (B is None or B.convex) \
            and hasattr(core, "interval"):
        def batch(fixed, c, values):
            return line_section_mass(core, B, fixed, G[0], c, values)
    if len(Y) <= policy.quad_max_dim:
        try:
            a = iterated_integral(fn, Y, sets, stds, order, base, batch_fn=batch)
            b = iterated_integral(coarse, Y, sets, stds, order - 1, base, batch_fn=batch)
        except NotImplementedError:
            a = iterated_integral(fn, Y, sets, stds, order, base)
            b = iterated_integral(coarse, Y, sets, stds, order - 1, base)
        return Estimate(a, abs(a - b) + 1e-13, "quadrature", order)
    seed = seed or RngSeed(0)
    pts = sample_normal(space, policy.mc_samples, seed, coords=Y)
    vals = np.array([fn({**base, **dict(zip(Y, row))}) for row in pts])
    return Estimate(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(len(vals))),
                    "monte_carlo", len(vals))


def section_identity_check(E: SetModel, F: Frame, B: SetModel | None, space: GaussianSpace,
                           resolution: int = 400, variant: str = "F",
                           order: int = DEFAULT_ORDER, policy: EvalPolicy = DEFAULT_POLICY,
                           seed: RngSeed | None = None) -> tuple[Estimate, Estimate]:
    """Both sides of ``int_B |pi_F nu_E| d|D chi_E| = int_Y |D_F chi_{E_y}|(B_y) d gamma_Y``.

    ``variant="perp"`` swaps the roles of ``F`` and its complement.
    """
    if variant not in ("F", "perp"):
        raise ValueError("variant must be 'F' or 'perp'")
    if not isinstance(F, Frame):
        F = Frame.from_vectors(F, space)
    G = F.coords if variant == "F" else F.complement
    lhs = _lhs_weighted(E, space, B, G, resolution)
    rhs = integrate_over_complement(E, B, G, space, order, policy, seed)
    return lhs, rhs


# ---------------------------------------------------------------------------
# Poincare inequality


def poincare_constant(t: float) -> float:
    """``c_t = sqrt(2/pi) int_0^t e^{-s} / sqrt(1 - e^{-2s}) ds``.

    Integrated in ``u = sqrt(s)``, where the integrand is smooth.
    """
    if not t > 0:
        raise ValueError("t must be positive")

    def f(u):
        if u == 0.0:
            return math.sqrt(2.0)
        s = u * u
        return 2.0 * u * math.exp(-s) / math.sqrt(-math.expm1(-2.0 * s))

    top = math.sqrt(t)
    val, _ = integrate.quad(f, 0.0, top, epsabs=0.0, epsrel=1e-13, limit=200)
    return math.sqrt(2.0 / math.pi) * val


@dataclass
class PoincareResult:
    lhs: Estimate
    bound: float
    strengthened: Estimate
    perimeter: float
    c_t: float

    def holds(self, k: float = 4.0) -> bool:
        return self.lhs.value <= self.bound + k * self.lhs.error


def poincare_check(E: SetModel, t: float, space: GaussianSpace, seed: RngSeed,
                   n: int = 200_000, policy: EvalPolicy = DEFAULT_POLICY,
                   resolution: int = 400) -> PoincareResult:
    """``int |T_t chi_E - chi_E| d gamma`` against ``c_t |D_gamma chi_E|(X)``.

    The left side averages ``|T_t chi_E(x) - chi_E(x)|`` over Gaussian ``x``;
    the strengthened double integral samples ``(x, y)`` pairs.
    """
    R, sup = reduce_to_support(E)
    sub = space.subspace(sup) if sup else GaussianSpace(1)
    X = sample_normal(sub, n, seed.child(1))
    inside = R.contains(X).astype(float)
    tv, _, _, _ = mehler_batch(R, t, X, sub, policy, seed.child(2))
    d = np.abs(tv - inside)
    lhs = Estimate(float(d.mean()), float(d.std(ddof=1) / math.sqrt(n)), "monte_carlo", n)
    Y = sample_normal(sub, n, seed.child(3))
    moved = R.contains(math.exp(-t) * X + float(np.sqrt(-np.expm1(-2 * t))) * Y).astype(float)
    dd = np.abs(inside - moved)
    strong = Estimate(float(dd.mean()), float(dd.std(ddof=1) / math.sqrt(n)), "monte_carlo", n)
    per = gaussian_perimeter(E, space, resolution).total
    c_t = poincare_constant(t)
    return PoincareResult(lhs, c_t * per, strong, per, c_t)


# ---------------------------------------------------------------------------
# smoothed total variation


def _halfspace_like(E):
    if isinstance(E, Halfspace):
        return E
    if isinstance(E, Complement):
        return _halfspace_like(E.inner)
    if isinstance(E, CylinderLift):
        return _halfspace_like(E.base)
    return None


def grid_rule(k: int, nodes: int, radius: float = 8.0, panel: int = 8):
    """Composite Gauss-Legendre rule on ``[-radius, radius]^k`` with Gaussian weights."""
    panels = max(1, nodes // panel)
    edges = np.linspace(-radius, radius, panels + 1)
    x, w = legendre_on(edges[:-1], edges[1:], panel)
    x, w = x.reshape(-1), w.reshape(-1)
    w = w * std_normal_pdf(x)
    grids = np.meshgrid(*([x] * k), indexing="ij")
    wg = np.meshgrid(*([w] * k), indexing="ij")
    pts = np.stack([g.reshape(-1) for g in grids], axis=1)
    wts = np.prod(np.stack([g.reshape(-1) for g in wg], axis=1), axis=1)
    return pts, wts


#: above this many mesh coordinates smoothed_tv falls back to Monte Carlo
GRID_MAX_DIM = 2


def smoothed_tv(E: SetModel, t: float, space: GaussianSpace, policy: EvalPolicy = DEFAULT_POLICY,
                seed: RngSeed | None = None, resolution: int = 400) -> Estimate:
    """``int |grad T_t chi_E|_H d gamma`` with ``grad T_t chi_E = e^{-t} T_t^*(D_gamma chi_E)``."""
    if not t > 0:
        raise ValueError("t must be positive")
    hs = _halfspace_like(E)
    if hs is not None and policy.mode in ("auto", "closed_form"):
        return Estimate(math.exp(-t) * float(std_normal_pdf(hs.offset)), 0.0, "closed_form", 0)
    mesh = boundary_mesh(E, space, resolution)
    k = len(mesh.coords)

    def field_norm(X):
        full = np.zeros((len(X), space.dim))
        full[:, list(mesh.coords)] = X
        V = dual_density(mesh, t, full, vector=True)
        return math.exp(-t) * np.linalg.norm(V, axis=1)

    if k <= GRID_MAX_DIM and policy.mode != "monte_carlo":
        def q(nodes):
            pts, w = grid_rule(k, nodes)
            return float(np.dot(w, field_norm(pts)))

        a = q(policy.grid_nodes)
        b = q(policy.grid_nodes // 2)
        return Estimate(a, abs(a - b), "quadrature", policy.grid_nodes)
    seed = seed or RngSeed(0)
    return mc_integrate(space.subspace(mesh.coords), field_norm, policy.mc_samples, seed)

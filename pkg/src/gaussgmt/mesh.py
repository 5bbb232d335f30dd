"""Discrete Gaussian surface measures ``G_m H^{m-1} | dE`` with inner normals.

A :class:`SurfaceMesh` is a quadrature rule on the boundary: ``sum w_i f(p_i)``
approximates ``int f G_m dH^{m-1}`` over ``dE``.  Meshes live in the
coordinates the set depends on (``coords``); every other ambient coordinate
is integrated out exactly against the standard Gaussian, which is legitimate
because cylindrical boundaries are products with the Gaussian in the free
directions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .core import GaussianSpace, hermite_rule, legendre_on, log_gaussian_density
from .errors import DegenerateSetError, UnmeshableSetError
from .quadrature import normal_pieces
from .sets import (Ball, Box, Complement, CylinderLift, DisjointUnion, Halfspace, Polytope,
                   SetModel, SmoothLevelSet, Trivial, section_coords)

#: unbounded faces are truncated at this radius per transverse coordinate
MESH_RADIUS = 8.0

#: Gauss-Hermite order used when lifting a mesh over coordinates it ignores
LIFT_ORDER = 8

#: relative floor added to the refinement delta when declaring mesh tolerance
TOL_FLOOR = 1e-12


@dataclass
class SurfaceMesh:
    points: np.ndarray
    normals: np.ndarray
    weights: np.ndarray
    coords: tuple[int, ...]
    ambient: int
    tolerance: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        k = len(self.coords)
        self.points = np.asarray(self.points, float).reshape(-1, k)
        self.normals = np.asarray(self.normals, float).reshape(-1, k)
        self.weights = np.asarray(self.weights, float).reshape(-1)
        if not (len(self.points) == len(self.normals) == len(self.weights)):
            raise ValueError("points, normals and weights disagree in length")

    def __len__(self):
        return len(self.weights)

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.weights))

    @property
    def dim(self) -> int:
        return len(self.coords)

    def full_points(self, fill: float = 0.0) -> np.ndarray:
        out = np.full((len(self), self.ambient), fill)
        out[:, list(self.coords)] = self.points
        return out

    def full_normals(self) -> np.ndarray:
        out = np.zeros((len(self), self.ambient))
        out[:, list(self.coords)] = self.normals
        return out

    def select(self, mask) -> "SurfaceMesh":
        mask = np.asarray(mask, bool)
        return replace(self, points=self.points[mask], normals=self.normals[mask],
                       weights=self.weights[mask], meta=dict(self.meta))

    def negated(self) -> "SurfaceMesh":
        return replace(self, normals=-self.normals, meta=dict(self.meta))

    def integrate(self, f: Callable) -> float:
        """``sum w_i f(p_i)`` with ``f`` evaluated on ambient points (free coords 0)."""
        if len(self) == 0:
            return 0.0
        return float(np.dot(self.weights, np.asarray(f(self.full_points()), float)))

    def vector_integrate(self, f: Callable) -> np.ndarray:
        """``sum w_i f(p_i) nu_i`` as an ambient vector."""
        if len(self) == 0:
            return np.zeros(self.ambient)
        vals = np.asarray(f(self.full_points()), float)
        return (self.weights * vals) @ self.full_normals()

    def mass_in(self, B: SetModel) -> float:
        return float(np.sum(self.weights[B.contains(self.full_points()[:, : B.dim])]))

    @staticmethod
    def concat(meshes: Sequence["SurfaceMesh"]) -> "SurfaceMesh":
        first = meshes[0]
        return SurfaceMesh(np.concatenate([m.points for m in meshes]),
                           np.concatenate([m.normals for m in meshes]),
                           np.concatenate([m.weights for m in meshes]),
                           first.coords, first.ambient,
                           sum(m.tolerance for m in meshes))


# ---------------------------------------------------------------------------
# public entry points


def boundary_mesh(E: SetModel, space: GaussianSpace, resolution: int = 400, *,
                  restrict_to: SetModel | None = None, full: bool = False,
                  allow_empty: bool = False) -> SurfaceMesh:
    """Mesh of ``G_m H^{m-1} | dE``.

    ``resolution`` is the node count along each one-dimensional face
    direction (square-rooted for two-dimensional faces).  With
    ``restrict_to=B`` the mesh is split along the faces of ``B`` and only
    elements inside ``B`` are kept, so ``total_mass`` approximates
    ``|D_gamma chi_E|(B)`` without staircase error.  ``full=True`` meshes every
    ambient coordinate instead of only the set's support.

    The declared ``tolerance`` is the change in total mass when the resolution
    is halved, plus a relative floor of 1e-12.
    """
    if resolution < 8:
        raise ValueError("resolution must be at least 8")
    if not space.is_standard:
        raise ValueError("surface meshes require the standard (unit spectrum) Gaussian")
    if E.dim > space.dim:
        raise ValueError("set dimension exceeds the space dimension")
    mesh = _mesh_over(E, space.dim, resolution, restrict_to, full)
    if len(mesh) == 0 and not allow_empty:
        raise DegenerateSetError("the set has empty (or null) boundary")
    coarse = _mesh_over(E, space.dim, max(8, resolution // 2), restrict_to, full)
    mesh.tolerance = abs(mesh.total_mass - coarse.total_mass) + TOL_FLOOR * max(1.0, mesh.total_mass)
    return mesh


def mesh_once(E: SetModel, ambient: int, resolution: int = 400,
              restrict_to: SetModel | None = None) -> SurfaceMesh:
    """Single-resolution mesh without a tolerance estimate; empty boundaries allowed."""
    return _mesh_over(E, ambient, resolution, restrict_to, False)


def _mesh_over(E, ambient, resolution, B, full):
    coords = set(E.support())
    if B is not None:
        coords |= set(B.support())
    if full:
        coords = set(range(ambient))
    coords = tuple(sorted(coords))
    if not coords:
        return SurfaceMesh(np.empty((0, 1)), np.empty((0, 1)), np.empty(0), (0,), ambient)
    Ek = section_coords(E, {}, coords) if E.dim >= 1 else E
    cuts, breaks = [], {}
    if B is not None:
        Bk = section_coords(B, {}, coords)
        cuts = Bk.affine_cuts()
        breaks = {i: Bk.breakpoints(i) for i in range(len(coords))}
    pts, nrm, w = _build(Ek, len(coords), resolution, cuts, breaks)
    mesh = SurfaceMesh(pts, nrm, w, coords, ambient)
    if B is not None and len(mesh):
        mesh = mesh.select(Bk.contains(pts))
    return mesh


# ---------------------------------------------------------------------------
# builders; each returns (points, inner normals, weights) in k coordinates

def _empty(k):
    return np.empty((0, k)), np.empty((0, k)), np.empty(0)


def _gauss_weight(pts):
    k = pts.shape[1]
    return np.exp(log_gaussian_density(GaussianSpace(k), pts))


def _build(E: SetModel, k: int, res: int, cuts, breaks):
    sup = E.support()
    if isinstance(E, Trivial) or not sup:
        return _empty(k)
    if len(sup) < k:
        return _lift(E, k, sup, res, cuts, breaks)
    if isinstance(E, Complement):
        p, n, w = _build(E.inner, k, res, cuts, breaks)
        return p, -n, w
    if isinstance(E, DisjointUnion):
        return _build_union(E, k, res, cuts, breaks)
    if isinstance(E, CylinderLift):
        base = E.base
        p, n, w = _build(base, base.dim, res, _permute_cuts(cuts, E.coords),
                         {i: breaks.get(c, []) for i, c in enumerate(E.coords)})
        P = np.zeros((len(w), k))
        N = np.zeros((len(w), k))
        P[:, list(E.coords)] = p
        N[:, list(E.coords)] = n
        return P, N, w
    if isinstance(E, Halfspace):
        return _build_halfspace(E, k, res, cuts)
    if isinstance(E, Ball):
        return _build_ball(E, k, res, cuts)
    if isinstance(E, Box):
        return _build_box(E, k, res, cuts, breaks)
    if isinstance(E, Polytope):
        return _build_polytope(E, k, res, cuts)
    if isinstance(E, SmoothLevelSet):
        return _build_level_set(E, k, res)
    raise UnmeshableSetError(f"no boundary parametrization for {type(E).__name__}")


def _permute_cuts(cuts, coords):
    out = []
    coords = list(coords)
    for a, b in cuts:
        mask = np.zeros(len(a), bool)
        mask[coords] = True
        if np.any(a[~mask] != 0):
            continue
        out.append((a[coords], b))
    return out


def _lift(E, k, sup, res, cuts, breaks):
    """Mesh ``E`` in its support, then tensor with a Gaussian rule in the rest."""
    sup = list(sup)
    free = [i for i in range(k) if i not in sup]
    # grows with the resolution so the halving tolerance sees the transverse rule too
    order = max(LIFT_ORDER, min(64, res // 8))
    base = section_coords(E, {i: 0.0 for i in free}, sup)
    p, n, w = _build(base, len(sup), res, _permute_cuts(cuts, sup),
                     {i: breaks.get(c, []) for i, c in enumerate(sup)})
    P = np.zeros((len(w), k))
    N = np.zeros((len(w), k))
    P[:, sup] = p
    N[:, sup] = n
    W = w
    for f in free:
        br = list(breaks.get(f, []))
        for a, b in cuts:
            nz = np.flatnonzero(a)
            if len(nz) == 1 and nz[0] == f:
                br.append(b / a[f])
        if br:
            x, wx = normal_pieces(br, max(8, order // 2))
        else:
            x, wx = hermite_rule(order)
        m = len(x)
        P = np.repeat(P, m, axis=0)
        N = np.repeat(N, m, axis=0)
        P[:, f] = np.tile(x, len(W))
        W = np.repeat(W, m) * np.tile(wx, len(W))
    return P, N, W


def _build_union(E, k, res, cuts, breaks):
    merged = dict(breaks)
    for i in range(k):
        merged[i] = list(breaks.get(i, [])) + E.breakpoints(i)
    out = []
    for part, other in ((E.left, E.right), (E.right, E.left)):
        p, n, w = _build(part, k, res, cuts, merged)
        if len(w):
            eps = 1e-7 * (1.0 + np.abs(p).max(axis=1, keepdims=True))
            # elements whose outer side lies in the other part are interior to the union
            keep = ~other.contains(p - eps * n)
            p, n, w = p[keep], n[keep], w[keep]
        out.append((p, n, w))
    return tuple(np.concatenate(z) for z in zip(*out))


def _split_interval(lo, hi, breaks, n):
    """Gauss-Legendre nodes on ``[lo, hi]`` split at ``breaks``."""
    cuts = sorted(b for b in breaks if lo < b < hi)
    edges = [lo, *cuts, hi]
    order = max(8, int(math.ceil(n / (len(edges) - 1))))
    xs, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        if b - a <= 1e-15:
            continue
        x, w = legendre_on(a, b, order)
        xs.append(x)
        ws.append(w)
    if not xs:
        return np.empty(0), np.empty(0)
    return np.concatenate(xs), np.concatenate(ws)


def _build_halfspace(E: Halfspace, k, res, cuts):
    h, c = E.direction, E.offset
    if k == 1:
        return np.array([[c / h[0]]]), np.array([[-np.sign(h[0])]]), _gauss_weight(np.array([[c / h[0]]]))
    if k == 2:
        return _build_polytope(Polytope(h[None, :], np.array([c])), k, res, cuts)
    if k == 3:
        return _build_polytope(Polytope(h[None, :], np.array([c])), k, res, cuts)
    if cuts:
        raise UnmeshableSetError("restricted halfspace meshes are limited to dim <= 3")
    # exact product rule: phi(c) on the hyperplane times Gaussian in transverse directions
    q, _ = np.linalg.qr(np.column_stack([h, np.eye(k)]))
    U = q[:, 1:k]
    n = max(3, int(round(res ** (1.0 / (k - 1)))))
    n = min(n, int(round(2e5 ** (1.0 / (k - 1)))))
    x, wx = hermite_rule(n)
    grids = np.meshgrid(*([x] * (k - 1)), indexing="ij")
    S = np.stack([g.reshape(-1) for g in grids], axis=1)
    W = np.prod(np.stack(np.meshgrid(*([wx] * (k - 1)), indexing="ij")).reshape(k - 1, -1), axis=0)
    P = c * h + S @ U.T
    W = W * math.exp(-0.5 * c * c) / math.sqrt(2 * math.pi)
    return P, np.tile(-h, (len(P), 1)), W


def _build_ball(E: Ball, k, res, cuts):
    c, r = E.center, E.radius
    if k == 1:
        P = np.array([[c[0] - r], [c[0] + r]])
        N = np.array([[1.0], [-1.0]])
        return P, N, _gauss_weight(P)
    if k == 2:
        angles = []
        for a, b in cuts:
            rho = math.hypot(a[0], a[1])
            if rho == 0:
                continue
            psi = math.atan2(a[1], a[0])
            arg = (b - a @ c) / (r * rho)
            if abs(arg) < 1:
                d = math.acos(arg)
                angles += [(psi + d) % (2 * math.pi), (psi - d) % (2 * math.pi)]
        # axis angles too: integrands built from single normal components kink there
        angles = sorted(angles + [0.0, math.pi / 2, math.pi, 1.5 * math.pi])
        edges = angles + [angles[0] + 2 * math.pi]
        th, wt = [], []
        order = max(8, int(math.ceil(res / len(angles))))
        for a, b in zip(edges[:-1], edges[1:]):
            if b - a <= 1e-15:
                continue
            x, w = legendre_on(a, b, order)
            th.append(x)
            wt.append(w)
        theta, wth = np.concatenate(th), np.concatenate(wt)
        u = np.column_stack([np.cos(theta), np.sin(theta)])
        P = c + r * u
        return P, -u, r * wth * _gauss_weight(P)
    if cuts:
        raise UnmeshableSetError("restricted ball meshes are limited to dim <= 2")
    u, w = _sphere_rule(k, max(8, int(round(res ** (1.0 / (k - 1))))))
    P = c + r * u
    return P, -u, r ** (k - 1) * w * _gauss_weight(P)


def _sphere_rule(k, n):
    """Product rule on the unit sphere ``S^{k-1}`` (polar angles x azimuth)."""
    phi = 2 * math.pi * (np.arange(2 * n) + 0.5) / (2 * n)
    U = np.column_stack([np.cos(phi), np.sin(phi)])
    W = np.full(2 * n, math.pi / n)
    for dim in range(3, k + 1):
        th, wth = legendre_on(0.0, math.pi, n)
        wth = wth * np.sin(th) ** (dim - 2)
        m = len(U)
        U = np.column_stack([np.repeat(np.cos(th), m), np.repeat(np.sin(th), m)[:, None] * np.tile(U, (len(th), 1))])
        W = np.repeat(wth, m) * np.tile(W, len(th))
    return U, W


def _build_box(E: Box, k, res, cuts, breaks):
    axis_cuts = {i: [] for i in range(k)}
    for a, b in cuts:
        nz = np.flatnonzero(a)
        if len(nz) == 1:
            axis_cuts[int(nz[0])].append(b / a[nz[0]])
        elif k <= 3:
            return _build_polytope(E.as_polytope(), k, res, cuts)
    lo = np.maximum(E.lower, -MESH_RADIUS)
    hi = np.minimum(E.upper, MESH_RADIUS)
    n_face = res if k == 2 else max(8, int(round(res ** (1.0 / max(1, k - 1)))))
    out_p, out_n, out_w = [], [], []
    for i in range(k):
        for val, sgn in ((E.lower[i], 1.0), (E.upper[i], -1.0)):
            if not math.isfinite(val):
                continue
            rules = []
            for j in range(k):
                if j == i:
                    continue
                x, w = _split_interval(lo[j], hi[j], axis_cuts[j] + list(breaks.get(j, [])), n_face)
                rules.append((x, w))
            if rules:
                grids = np.meshgrid(*[r[0] for r in rules], indexing="ij")
                wg = np.meshgrid(*[r[1] for r in rules], indexing="ij")
                S = np.stack([g.reshape(-1) for g in grids], axis=1)
                W = np.prod(np.stack([g.reshape(-1) for g in wg], axis=1), axis=1)
            else:
                S = np.empty((1, 0))
                W = np.ones(1)
            P = np.empty((len(W), k))
            P[:, i] = val
            P[:, [j for j in range(k) if j != i]] = S
            N = np.zeros((len(W), k))
            N[:, i] = sgn
            out_p.append(P)
            out_n.append(N)
            out_w.append(W * _gauss_weight(P))
    if not out_p:
        return _empty(k)
    return np.concatenate(out_p), np.concatenate(out_n), np.concatenate(out_w)


def _bounding_rows(k, R=MESH_RADIUS):
    A = np.vstack([np.eye(k), -np.eye(k)])
    return A, np.full(2 * k, R)


def _build_polytope(E: Polytope, k, res, cuts):
    A, b = E.A, E.b
    if k == 1:
        lo, hi = E.interval(np.zeros((1, 1)), 0)
        pts, nrm = [], []
        if math.isfinite(lo[0]):
            pts.append([lo[0]])
            nrm.append([1.0])
        if math.isfinite(hi[0]) and hi[0] > lo[0]:
            pts.append([hi[0]])
            nrm.append([-1.0])
        if not pts or hi[0] < lo[0]:
            return _empty(1)
        P = np.array(pts)
        return P, np.array(nrm), _gauss_weight(P)
    if k == 2:
        return _polytope_2d(A, b, res, cuts)
    if k == 3:
        return _polytope_3d(A, b, res, cuts)
    raise UnmeshableSetError("polytope meshes are limited to dim <= 3")


def _polytope_2d(A, b, res, cuts):
    BA, Bb = _bounding_rows(2)
    out_p, out_n, out_w = [], [], []
    for i in range(len(A)):
        a = A[i]
        d = np.array([-a[1], a[0]])
        p0 = b[i] * a
        lo, hi = -np.inf, np.inf
        rows = [(A[j], b[j]) for j in range(len(A)) if j != i] + list(zip(BA, Bb))
        empty = False
        for aj, bj in rows:
            coef = aj @ d
            rhs = bj - aj @ p0
            if abs(coef) < 1e-14:
                if rhs < -1e-12:
                    empty = True
                    break
                # parallel constraint: only coincident opposite faces matter
                continue
            if coef > 0:
                hi = min(hi, rhs / coef)
            else:
                lo = max(lo, rhs / coef)
        if empty or not hi - lo > 1e-12:
            continue
        if any(j != i and np.allclose(A[j], a, atol=1e-14) and abs(b[j] - b[i]) < 1e-14 and j < i
               for j in range(len(A))):
            continue  # duplicated facet
        br = []
        for ac, bc in cuts:
            coef = ac @ d
            if abs(coef) > 1e-14:
                br.append((bc - ac @ p0) / coef)
        s, w = _split_interval(lo, hi, br, res)
        P = p0 + s[:, None] * d
        out_p.append(P)
        out_n.append(np.tile(-a, (len(s), 1)))
        out_w.append(w * _gauss_weight(P))
    if not out_p:
        return _empty(2)
    return np.concatenate(out_p), np.concatenate(out_n), np.concatenate(out_w)


def clip_polygon(poly: np.ndarray, alpha: np.ndarray, beta: float) -> np.ndarray:
    """Sutherland-Hodgman clip of a convex polygon to ``alpha . p <= beta``."""
    if len(poly) == 0:
        return poly
    out = []
    vals = poly @ alpha - beta
    m = len(poly)
    for idx in range(m):
        cur, nxt = poly[idx], poly[(idx + 1) % m]
        vc, vn = vals[idx], vals[(idx + 1) % m]
        if vc <= 0:
            out.append(cur)
        if (vc < 0 < vn) or (vn < 0 < vc):
            tpar = vc / (vc - vn)
            out.append(cur + tpar * (nxt - cur))
    return np.array(out) if out else np.empty((0, 2))


def polygon_area(poly):
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def triangle_rule(v0, v1, v2, n):
    """Collapsed (Duffy) Gauss-Legendre rule on a triangle in any ambient dimension."""
    x, w = legendre_on(0.0, 1.0, n)
    U, Wv = np.meshgrid(x, x, indexing="ij")
    WU, WW = np.meshgrid(w, w, indexing="ij")
    u, v = U.reshape(-1), Wv.reshape(-1)
    wt = (WU * WW).reshape(-1) * u
    e1, e2 = v1 - v0, v2 - v1
    pts = v0 + u[:, None] * (e1 + v[:, None] * e2)
    cross = np.cross(e1, e2) if len(v0) == 3 else np.array([e1[0] * e2[1] - e1[1] * e2[0]])
    return pts, wt * np.linalg.norm(cross)


#: faces are diced into cells of this side length before triangulation
CELL = 1.0


def _grid_cells(poly, p0):
    """Split a planar polygon into unit cells; cells beyond Gaussian radius ~9 are dropped."""
    off = float(np.linalg.norm(p0))
    lo = np.floor(poly.min(axis=0) / CELL) * CELL
    hi = np.ceil(poly.max(axis=0) / CELL) * CELL
    out = []
    for x0 in np.arange(lo[0], hi[0], CELL):
        strip = clip_polygon(clip_polygon(poly, np.array([-1.0, 0.0]), -x0),
                             np.array([1.0, 0.0]), x0 + CELL)
        if len(strip) < 3:
            continue
        for y0 in np.arange(lo[1], hi[1], CELL):
            cell = clip_polygon(clip_polygon(strip, np.array([0.0, -1.0]), -y0),
                                np.array([0.0, 1.0]), y0 + CELL)
            if polygon_area(cell) < 1e-14:
                continue
            if math.hypot(off, float(np.min(np.linalg.norm(cell, axis=1)))) > 10.5:
                continue
            out.append(cell)
    return out


def _polytope_3d(A, b, res, cuts):
    BA, Bb = _bounding_rows(3)
    n_tri = max(3, int(round(math.sqrt(res) / 2)))
    out_p, out_n, out_w = [], [], []
    for i in range(len(A)):
        a = A[i]
        if any(j < i and np.allclose(A[j], a, atol=1e-14) and abs(b[j] - b[i]) < 1e-14
               for j in range(len(A))):
            continue
        q, _ = np.linalg.qr(np.column_stack([a, np.eye(3)]))
        e1, e2 = q[:, 1], q[:, 2]
        p0 = b[i] * a
        R = 2 * MESH_RADIUS * math.sqrt(3)
        poly = np.array([[-R, -R], [R, -R], [R, R], [-R, R]], float)
        rows = [(A[j], b[j]) for j in range(len(A)) if j != i] + list(zip(BA, Bb))
        for aj, bj in rows:
            alpha = np.array([aj @ e1, aj @ e2])
            beta = bj - aj @ p0
            if np.linalg.norm(alpha) < 1e-14:
                if beta < -1e-12:
                    poly = np.empty((0, 2))
                    break
                continue
            poly = clip_polygon(poly, alpha, beta)
            if len(poly) < 3:
                break
        if polygon_area(poly) < 1e-14:
            continue
        pieces = _grid_cells(poly, p0)
        for ac, bc in cuts:
            alpha = np.array([ac @ e1, ac @ e2])
            beta = bc - ac @ p0
            if np.linalg.norm(alpha) < 1e-14:
                continue
            nxt = []
            for pg in pieces:
                for part in (clip_polygon(pg, alpha, beta), clip_polygon(pg, -alpha, -beta)):
                    if polygon_area(part) > 1e-14:
                        nxt.append(part)
            pieces = nxt
        for pg in pieces:
            V = p0 + pg[:, 0:1] * e1 + pg[:, 1:2] * e2
            for t in range(1, len(V) - 1):
                P, W = triangle_rule(V[0], V[t], V[t + 1], n_tri)
                out_p.append(P)
                out_n.append(np.tile(-a, (len(P), 1)))
                out_w.append(W * _gauss_weight(P))
    if not out_p:
        return _empty(3)
    return np.concatenate(out_p), np.concatenate(out_n), np.concatenate(out_w)


def _project_to_level(E: SmoothLevelSet, P, iters=6):
    for _ in range(iters):
        g = np.asarray(E.g(P), float)
        grad = np.asarray(E.grad_g(P), float)
        P = P - (g / np.maximum(np.sum(grad * grad, axis=1), 1e-300))[:, None] * grad
    return P


def _build_level_set(E: SmoothLevelSet, k, res):
    from skimage import measure

    W = E.window
    n = max(256, res)
    if k == 2:
        xs = np.linspace(-W, W, n)
        X, Y = np.meshgrid(xs, xs, indexing="ij")
        G = np.asarray(E.g(np.column_stack([X.ravel(), Y.ravel()])), float).reshape(n, n)
        h = xs[1] - xs[0]
        out_p, out_w = [], []
        for cont in measure.find_contours(G, 0.0):
            V = _project_to_level(E, -W + cont * h)
            a, b = V[:-1], V[1:]
            seg = np.linalg.norm(b - a, axis=1)
            mid = _project_to_level(E, 0.5 * (a + b))
            keep = seg > 0
            out_p.append(mid[keep])
            out_w.append(seg[keep])
        if not out_p:
            return _empty(2)
        P = np.concatenate(out_p)
        w = np.concatenate(out_w)
    elif k == 3:
        n = max(64, int(round(res ** 0.5 * 4)))
        xs = np.linspace(-W, W, n)
        X, Y, Z = np.meshgrid(xs, xs, xs, indexing="ij")
        G = np.asarray(E.g(np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])), float).reshape(n, n, n)
        h = xs[1] - xs[0]
        try:
            verts, faces, _, _ = measure.marching_cubes(G, 0.0, spacing=(h, h, h))
        except (ValueError, RuntimeError):
            return _empty(3)
        verts = _project_to_level(E, verts - W)
        tri = verts[faces]
        area = 0.5 * np.linalg.norm(np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)
        P = _project_to_level(E, tri.mean(axis=1))
        w = area
    else:
        raise UnmeshableSetError("level-set meshes are limited to dim 2 and 3")
    grad = np.asarray(E.grad_g(P), float)
    N = -grad / np.linalg.norm(grad, axis=1, keepdims=True)
    return P, N, w * _gauss_weight(P)


# ---------------------------------------------------------------------------
# Lipschitz graphs


@dataclass(frozen=True)
class LipschitzGraph:
    """Graph ``{(z, u(z)) : a <= z <= b}`` in the plane with Lipschitz constant ``lipschitz``.

    ``radius`` must satisfy ``graph subset B_radius``; it is checked on a fine grid.
    """

    u: Callable
    du: Callable
    a: float
    b: float
    lipschitz: float
    radius: float

    def __post_init__(self):
        z = np.linspace(self.a, self.b, 4001)
        pts = np.column_stack([z, self.u(z)])
        if np.max(np.linalg.norm(pts, axis=1)) > self.radius:
            raise ValueError("graph is not contained in the ball of the given radius")
        if np.max(np.abs(self.du(z))) > self.lipschitz + 1e-12:
            raise ValueError("derivative exceeds the declared Lipschitz constant")

    def mesh(self, resolution: int = 2000) -> SurfaceMesh:
        z, w = legendre_on(self.a, self.b, resolution)
        d = self.du(z)
        P = np.column_stack([z, self.u(z)])
        jac = np.sqrt(1.0 + d * d)
        # inner normal of the subgraph {x_2 <= u(x_1)}
        N = np.column_stack([d, -np.ones_like(d)]) / jac[:, None]
        mesh = SurfaceMesh(P, N, w * jac * _gauss_weight(P), (0, 1), 2)
        mesh.meta.update(lipschitz=self.lipschitz, radius=self.radius, distance=self.distance)
        return mesh

    def distance(self, X) -> np.ndarray:
        """Euclidean distance from each row of ``X`` to the graph."""
        X = np.atleast_2d(np.asarray(X, float))
        zg = np.linspace(self.a, self.b, 4001)
        G = np.column_stack([zg, self.u(zg)])
        d2 = np.sum((X[:, None, :] - G[None, :, :]) ** 2, axis=2)
        idx = np.argmin(d2, axis=1)
        h = zg[1] - zg[0]
        lo = np.maximum(zg[idx] - h, self.a)
        hi = np.minimum(zg[idx] + h, self.b)

        def f(z):
            return (X[:, 0] - z) ** 2 + (X[:, 1] - self.u(z)) ** 2

        for _ in range(80):
            m1 = lo + (hi - lo) / 3
            m2 = hi - (hi - lo) / 3
            left = f(m1) < f(m2)
            hi = np.where(left, m2, hi)
            lo = np.where(left, lo, m1)
        best = np.minimum(f(0.5 * (lo + hi)), d2[np.arange(len(X)), idx])
        return np.sqrt(best)

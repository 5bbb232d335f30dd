"""Borel set models with indicator oracles, sections and normals.

All variants are immutable.  Coordinates are 0-based.  ``contains`` is
vectorized over the leading axes of its argument.  Normals follow one global
convention: the *inner* unit normal, i.e. the direction pointing into the set.
With it ``D_gamma chi_E = nu_E |D_gamma chi_E|`` and the Gaussian
integration-by-parts formula holds (see ``tests/test_sets.py``).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import Frame, RngSeed, sample_normal, GaussianSpace
from .errors import (FrameNotAlignedError, NonsmoothPointError, NotOnBoundaryError,
                     OverlapError)

#: distance tolerance used to decide that a point sits on a face
ON_FACE_TOL = 1e-8

_INF = math.inf


def _as_points(x, dim):
    x = np.asarray(x, float)
    if x.shape[-1] < dim:
        raise ValueError(f"point has {x.shape[-1]} coordinates, set needs {dim}")
    return x


class SetModel:
    """Common interface.  Subclasses set ``dim`` and implement the hooks."""

    dim: int
    convex: bool = False

    def contains(self, x) -> np.ndarray:
        raise NotImplementedError

    def support(self) -> tuple[int, ...]:
        """Coordinates the indicator actually depends on."""
        return tuple(range(self.dim))

    def breakpoints(self, coord: int) -> list[float]:
        """Values of ``x[coord]`` where sections change shape (jumps or kinks)."""
        return []

    def interval(self, P: np.ndarray, j: int):
        """For convex sets: ``(lo, hi)`` with ``{s : P with x_j = s} in E = [lo, hi]``.

        Empty sections have ``lo > hi``.  ``P`` has shape ``(n, dim)``; column
        ``j`` is ignored.
        """
        raise NotImplementedError(f"{type(self).__name__} has no line sections")

    def fix(self, fixed: dict[int, float], keep: Sequence[int]) -> "SetModel":
        """Set in the coordinates ``keep`` after freezing the ``fixed`` ones."""
        raise NotImplementedError

    def normal_at(self, p) -> np.ndarray:
        raise NotImplementedError

    def affine_cuts(self) -> list[tuple[np.ndarray, float]]:
        """Affine constraints ``a.x <= b`` whose hyperplanes carry the set's jumps."""
        return []

    def _check_dim(self, keep, fixed):
        if set(keep) & set(fixed):
            raise ValueError("a coordinate cannot be both kept and fixed")


def section(E: SetModel, frame: Frame, y) -> SetModel:
    """``E_y = {z in F : (z, y) in E}`` for a coordinate-aligned frame.

    ``y`` lists the complementary coordinates in increasing order.  The result
    lives in ``frame.dim`` variables ordered like ``frame.coords``.
    """
    if not isinstance(frame, Frame):
        frame = Frame.from_vectors(frame)
    if frame.ambient < E.dim:
        raise FrameNotAlignedError("frame lives in a smaller space than the set")
    y = np.atleast_1d(np.asarray(y, float))
    comp = frame.complement
    if len(y) != len(comp):
        raise ValueError(f"y must have {len(comp)} entries")
    return section_coords(E, {c: float(v) for c, v in zip(comp, y)}, frame.coords)


def _contains_fixed(E, fixed):
    p = np.zeros(E.dim)
    for c, v in fixed.items():
        p[c] = v
    return bool(E.contains(p))


def reduce_to_support(E: SetModel) -> tuple[SetModel, tuple[int, ...]]:
    """Drop coordinates the set ignores; returns the reduced set and its coords."""
    sup = E.support()
    if tuple(sup) == tuple(range(E.dim)):
        return E, sup
    if not sup:
        return Trivial(1, bool(E.contains(np.zeros(E.dim)))), ()
    frame = Frame(sup, E.dim)
    return section(E, frame, np.zeros(E.dim - len(sup))), sup


# ---------------------------------------------------------------------------
# variants


@dataclass(frozen=True, eq=False)
class Trivial(SetModel):
    """The empty set or the whole space in ``dim`` coordinates."""

    dim: int
    full: bool
    convex = True

    def contains(self, x):
        x = np.asarray(x, float)
        return np.full(x.shape[:-1], self.full, dtype=bool)

    def support(self):
        return ()

    def interval(self, P, j):
        n = len(P)
        if self.full:
            return np.full(n, -_INF), np.full(n, _INF)
        return np.full(n, _INF), np.full(n, -_INF)

    def fix(self, fixed, keep):
        return Trivial(len(keep), self.full)

    def normal_at(self, p):
        raise NotOnBoundaryError("trivial sets have no boundary")


@dataclass(frozen=True, eq=False)
class Halfspace(SetModel):
    """``{x : <x, h> <= c}``; ``direction`` is normalized on construction."""

    direction: np.ndarray
    offset: float
    convex = True

    def __post_init__(self):
        h = np.asarray(self.direction, float).reshape(-1)
        nrm = np.linalg.norm(h)
        if not nrm > 0:
            raise ValueError("halfspace direction must be nonzero")
        h = h / nrm
        h.setflags(write=False)
        object.__setattr__(self, "direction", h)
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def dim(self):
        return len(self.direction)

    def contains(self, x):
        x = _as_points(x, self.dim)[..., : self.dim]
        return x @ self.direction <= self.offset

    def support(self):
        return tuple(int(i) for i in np.flatnonzero(self.direction))

    def breakpoints(self, coord):
        if self.support() == (coord,):
            return [self.offset / self.direction[coord]]
        return []

    def interval(self, P, j):
        h, c = self.direction, self.offset
        rest = P[:, : self.dim] @ h - h[j] * P[:, j]
        n = len(P)
        if h[j] > 0:
            return np.full(n, -_INF), (c - rest) / h[j]
        if h[j] < 0:
            return (c - rest) / h[j], np.full(n, _INF)
        ok = rest <= c
        return np.where(ok, -_INF, _INF), np.where(ok, _INF, -_INF)

    def fix(self, fixed, keep):
        self._check_dim(keep, fixed)
        h = self.direction
        rest = sum(h[c] * v for c, v in fixed.items())
        a = h[list(keep)]
        nrm = float(np.linalg.norm(a))
        if nrm < 1e-15:
            return Trivial(len(keep), rest <= self.offset)
        return Halfspace(a / nrm, (self.offset - rest) / nrm)

    def normal_at(self, p):
        p = np.asarray(p, float)
        if abs(p[: self.dim] @ self.direction - self.offset) > ON_FACE_TOL:
            raise NotOnBoundaryError("point is not on the hyperplane")
        return -self.direction.copy()

    def affine_cuts(self):
        return [(self.direction.copy(), self.offset)]


@dataclass(frozen=True, eq=False)
class Ball(SetModel):
    center: np.ndarray
    radius: float
    convex = True

    def __post_init__(self):
        c = np.asarray(self.center, float).reshape(-1)
        c.setflags(write=False)
        object.__setattr__(self, "center", c)
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self):
        return len(self.center)

    def contains(self, x):
        x = _as_points(x, self.dim)[..., : self.dim]
        return np.sum(np.square(x - self.center), axis=-1) <= self.radius**2

    def breakpoints(self, coord):
        return [self.center[coord] - self.radius, self.center[coord] + self.radius]

    def interval(self, P, j):
        d = P[:, : self.dim] - self.center
        d2 = np.sum(d * d, axis=1) - d[:, j] ** 2
        h2 = self.radius**2 - d2
        half = np.sqrt(np.maximum(h2, 0.0))
        lo = np.where(h2 > 0, self.center[j] - half, _INF)
        hi = np.where(h2 > 0, self.center[j] + half, -_INF)
        return lo, hi

    def fix(self, fixed, keep):
        self._check_dim(keep, fixed)
        d2 = sum((v - self.center[c]) ** 2 for c, v in fixed.items())
        r2 = self.radius**2 - d2
        if r2 <= 0:
            return Trivial(len(keep), False)
        return Ball(self.center[list(keep)], math.sqrt(r2))

    def normal_at(self, p):
        p = np.asarray(p, float)[: self.dim]
        v = self.center - p
        dist = np.linalg.norm(v)
        if abs(dist - self.radius) > ON_FACE_TOL * max(1.0, self.radius):
            raise NotOnBoundaryError("point is not on the sphere")
        return v / dist


@dataclass(frozen=True, eq=False)
class Box(SetModel):
    """Product of closed intervals; infinite endpoints allowed."""

    lower: np.ndarray
    upper: np.ndarray
    convex = True

    def __post_init__(self):
        lo = np.asarray(self.lower, float).reshape(-1)
        hi = np.asarray(self.upper, float).reshape(-1)
        if lo.shape != hi.shape:
            raise ValueError("lower and upper must have equal length")
        if np.any(lo > hi):
            raise ValueError("box interval with lower > upper")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def from_intervals(cls, intervals):
        iv = np.asarray(intervals, float)
        return cls(iv[:, 0], iv[:, 1])

    @property
    def dim(self):
        return len(self.lower)

    def contains(self, x):
        x = _as_points(x, self.dim)[..., : self.dim]
        return np.all((x >= self.lower) & (x <= self.upper), axis=-1)

    def support(self):
        fin = np.isfinite(self.lower) | np.isfinite(self.upper)
        return tuple(int(i) for i in np.flatnonzero(fin))

    def breakpoints(self, coord):
        return [v for v in (self.lower[coord], self.upper[coord]) if math.isfinite(v)]

    def interval(self, P, j):
        x = P[:, : self.dim]
        inside = (x >= self.lower) & (x <= self.upper)
        inside[:, j] = True
        ok = np.all(inside, axis=1)
        return (np.where(ok, self.lower[j], _INF), np.where(ok, self.upper[j], -_INF))

    def fix(self, fixed, keep):
        self._check_dim(keep, fixed)
        for c, v in fixed.items():
            if not self.lower[c] <= v <= self.upper[c]:
                return Trivial(len(keep), False)
        keep = list(keep)
        return Box(self.lower[keep], self.upper[keep])

    def normal_at(self, p):
        p = np.asarray(p, float)[: self.dim]
        if np.any(p < self.lower - ON_FACE_TOL) or np.any(p > self.upper + ON_FACE_TOL):
            raise NotOnBoundaryError("point is outside the box")
        at_lo = np.abs(p - self.lower) <= ON_FACE_TOL
        at_hi = np.abs(p - self.upper) <= ON_FACE_TOL
        hits = int(np.sum(at_lo) + np.sum(at_hi))
        if hits == 0:
            raise NotOnBoundaryError("point is interior to the box")
        if hits > 1:
            raise NonsmoothPointError("point lies on a box edge or corner")
        n = np.zeros(self.dim)
        i = int(np.flatnonzero(at_lo | at_hi)[0])
        n[i] = 1.0 if at_lo[i] else -1.0
        return n

    def affine_cuts(self):
        cuts = []
        for i in range(self.dim):
            e = np.zeros(self.dim)
            e[i] = 1.0
            if math.isfinite(self.upper[i]):
                cuts.append((e, float(self.upper[i])))
            if math.isfinite(self.lower[i]):
                cuts.append((-e, -float(self.lower[i])))
        return cuts

    def as_polytope(self) -> "Polytope":
        cuts = self.affine_cuts()
        if not cuts:
            raise ValueError("unbounded-everywhere box has no facets")
        return Polytope(np.array([a for a, _ in cuts]), np.array([b for _, b in cuts]))


@dataclass(frozen=True, eq=False)
class Polytope(SetModel):
    """``{x : A x <= b}`` with rows normalized to unit length."""

    A: np.ndarray
    b: np.ndarray
    convex = True
    _vertex_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, float))
        b = np.asarray(self.b, float).reshape(-1)
        if len(A) != len(b):
            raise ValueError("A and b row counts differ")
        nrm = np.linalg.norm(A, axis=1)
        if np.any(nrm == 0):
            raise ValueError("zero constraint row")
        A = A / nrm[:, None]
        b = b / nrm
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @classmethod
    def from_halfspaces(cls, halfspaces: Sequence[Halfspace]):
        return cls(np.array([h.direction for h in halfspaces]),
                   np.array([h.offset for h in halfspaces]))

    @classmethod
    def simplex(cls, vertices):
        """Simplex spanned by ``dim + 1`` affinely independent vertices."""
        V = np.asarray(vertices, float)
        d = V.shape[1]
        if V.shape[0] != d + 1:
            raise ValueError("a simplex in R^d needs d + 1 vertices")
        rows, rhs = [], []
        for i in range(d + 1):
            others = np.delete(V, i, axis=0)
            if d == 1:
                a = np.array([1.0])
            else:
                diff = others[1:] - others[0]
                # normal = null vector of the facet's edge matrix
                _, _, vt = np.linalg.svd(diff)
                a = vt[-1]
            bb = a @ others[0]
            if a @ V[i] > bb:
                a, bb = -a, -bb
            rows.append(a)
            rhs.append(bb)
        return cls(np.array(rows), np.array(rhs))

    @property
    def dim(self):
        return self.A.shape[1]

    def contains(self, x):
        x = _as_points(x, self.dim)[..., : self.dim]
        return np.all(x @ self.A.T <= self.b, axis=-1)

    def support(self):
        return tuple(int(i) for i in np.flatnonzero(np.any(self.A != 0, axis=0)))

    def vertices(self) -> np.ndarray:
        if "v" in self._vertex_cache:
            return self._vertex_cache["v"]
        d = self.dim
        combos = list(itertools.combinations(range(len(self.A)), d))
        out = np.empty((0, d))
        if combos:
            M = self.A[np.array(combos)]
            r = self.b[np.array(combos)]
            det = np.linalg.det(M)
            good = np.abs(det) > 1e-12
            if np.any(good):
                sol = np.linalg.solve(M[good], r[good][..., None])[..., 0]
                feas = np.all(sol @ self.A.T <= self.b + 1e-9, axis=1)
                out = sol[feas]
        self._vertex_cache["v"] = out
        return out

    def breakpoints(self, coord):
        V = self.vertices()
        return sorted(set(np.round(V[:, coord], 15).tolist())) if len(V) else []

    def interval(self, P, j):
        x = P[:, : self.dim]
        a_j = self.A[:, j]
        rest = x @ self.A.T - np.outer(x[:, j], a_j)
        slack = self.b - rest
        n = len(P)
        lo = np.full(n, -_INF)
        hi = np.full(n, _INF)
        pos, neg, zero = a_j > 0, a_j < 0, a_j == 0
        if np.any(pos):
            hi = np.min(slack[:, pos] / a_j[pos], axis=1)
        if np.any(neg):
            lo = np.max(slack[:, neg] / a_j[neg], axis=1)
        if np.any(zero):
            bad = np.any(slack[:, zero] < 0, axis=1)
            lo = np.where(bad, _INF, lo)
            hi = np.where(bad, -_INF, hi)
        return lo, hi

    def fix(self, fixed, keep):
        self._check_dim(keep, fixed)
        keep = list(keep)
        b = self.b.copy()
        for c, v in fixed.items():
            b = b - self.A[:, c] * v
        A = self.A[:, keep]
        nrm = np.linalg.norm(A, axis=1)
        flat = nrm < 1e-15
        if np.any(b[flat] < 0):
            return Trivial(len(keep), False)
        if np.all(flat):
            return Trivial(len(keep), True)
        return Polytope(A[~flat], b[~flat])

    def active_rows(self, p, tol=ON_FACE_TOL):
        p = np.asarray(p, float)[: self.dim]
        slack = self.b - self.A @ p
        if np.any(slack < -tol):
            raise NotOnBoundaryError("point is outside the polytope")
        return np.flatnonzero(np.abs(slack) <= tol)

    def normal_at(self, p):
        act = self.active_rows(p)
        if len(act) == 0:
            raise NotOnBoundaryError("point is interior to the polytope")
        if len(act) > 1:
            raise NonsmoothPointError("point lies on a polytope edge or corner")
        return -self.A[act[0]].copy()

    def affine_cuts(self):
        return [(a.copy(), float(bb)) for a, bb in zip(self.A, self.b)]


@dataclass(frozen=True, eq=False)
class SmoothLevelSet(SetModel):
    """``{x : g(x) <= 0}`` for a C^1 function with nonvanishing gradient near ``{g = 0}``.

    ``g`` maps ``(n, dim)`` to ``(n,)`` and ``grad_g`` maps ``(n, dim)`` to
    ``(n, dim)``.  ``window`` bounds the region searched by the mesher.
    """

    g: Callable
    grad_g: Callable
    dim: int
    window: float = 8.0
    name: str = "level_set"

    def contains(self, x):
        x = _as_points(x, self.dim)[..., : self.dim]
        flat = x.reshape(-1, self.dim)
        return (np.asarray(self.g(flat)) <= 0).reshape(x.shape[:-1])

    def fix(self, fixed, keep):
        self._check_dim(keep, fixed)
        keep = list(keep)
        g, grad = self.g, self.grad_g
        dim = self.dim

        def full(z):
            z = np.atleast_2d(z)
            x = np.zeros((len(z), dim))
            for c, v in fixed.items():
                x[:, c] = v
            x[:, keep] = z
            return x

        return SmoothLevelSet(lambda z: g(full(z)), lambda z: grad(full(z))[:, keep],
                              len(keep), self.window, self.name)

    def normal_at(self, p):
        p = np.atleast_2d(np.asarray(p, float)[: self.dim])
        gv = float(np.asarray(self.g(p))[0])
        grad = np.asarray(self.grad_g(p), float)[0]
        gn = np.linalg.norm(grad)
        if gn == 0:
            raise NonsmoothPointError("gradient vanishes")
        if abs(gv) / gn > ON_FACE_TOL:
            raise NotOnBoundaryError("point is not on the level set")
        return -grad / gn


@dataclass(frozen=True, eq=False)
class CylinderLift(SetModel):
    """Cylindrical set ``{x : (x[coords]) in base}`` in ``R^dim``."""

    base: SetModel
    coords: tuple[int, ...]
    ambient: int | None = None

    def __post_init__(self):
        coords = tuple(int(c) for c in self.coords)
        if len(coords) != self.base.dim:
            raise ValueError("need one ambient coordinate per base coordinate")
        if len(set(coords)) != len(coords) or min(coords) < 0:
            raise ValueError("lift coordinates must be distinct and nonnegative")
        object.__setattr__(self, "coords", coords)
        amb = max(coords) + 1 if self.ambient is None else int(self.ambient)
        if amb <= max(coords):
            raise ValueError("ambient dimension too small for the lift coordinates")
        object.__setattr__(self, "ambient", amb)

    @property
    def dim(self):
        return self.ambient

    @property
    def convex(self):
        return self.base.convex

    def contains(self, x):
        x = _as_points(x, max(self.coords) + 1)
        return self.base.contains(x[..., list(self.coords)])

    def support(self):
        return tuple(sorted(self.coords[i] for i in self.base.support()))

    def breakpoints(self, coord):
        if coord in self.coords:
            return self.base.breakpoints(self.coords.index(coord))
        return []

    def interval(self, P, j):
        sub = P[:, list(self.coords)]
        if j in self.coords:
            return self.base.interval(sub, self.coords.index(j))
        ok = self.base.contains(sub)
        return np.where(ok, -_INF, _INF), np.where(ok, _INF, -_INF)

    def fix(self, fixed, keep):
        self._check_dim(keep, fixed)
        keep = list(keep)
        base_fixed = {i: fixed[c] for i, c in enumerate(self.coords) if c in fixed}
        base_keep = [i for i, c in enumerate(self.coords) if c in keep]
        if not base_keep:
            missing = [i for i, c in enumerate(self.coords) if c not in fixed]
            pt = np.zeros(self.base.dim)
            for i, v in base_fixed.items():
                pt[i] = v
            if missing:
                # unfixed, unkept coordinates: only allowed if the base ignores them
                if set(missing) & set(self.base.support()):
                    raise ValueError("section leaves base coordinates undetermined")
            return Trivial(len(keep), bool(self.base.contains(pt)))
        free_unkept = [i for i, c in enumerate(self.coords) if c not in keep and c not in fixed]
        for i in free_unkept:
            if i in self.base.support():
                raise ValueError("section leaves base coordinates undetermined")
            base_fixed[i] = 0.0
        sub = self.base.fix(base_fixed, base_keep)
        pos = tuple(keep.index(self.coords[i]) for i in base_keep)
        return CylinderLift(sub, pos, len(keep)).simplify()

    def simplify(self) -> SetModel:
        if isinstance(self.base, Trivial):
            return Trivial(self.ambient, self.base.full)
        if self.coords == tuple(range(self.ambient)):
            return self.base
        return self

    def normal_at(self, p):
        p = np.asarray(p, float)
        nb = self.base.normal_at(p[list(self.coords)])
        out = np.zeros(self.ambient)
        out[list(self.coords)] = nb
        return out

    def affine_cuts(self):
        cuts = []
        for a, b in self.base.affine_cuts():
            full = np.zeros(self.ambient)
            full[list(self.coords)] = a
            cuts.append((full, b))
        return cuts


@dataclass(frozen=True, eq=False)
class Complement(SetModel):
    inner: SetModel

    @property
    def dim(self):
        return self.inner.dim

    def contains(self, x):
        return ~self.inner.contains(x)

    def support(self):
        return self.inner.support()

    def breakpoints(self, coord):
        return self.inner.breakpoints(coord)

    def fix(self, fixed, keep):
        sub = self.inner.fix(fixed, keep)
        if isinstance(sub, Trivial):
            return Trivial(sub.dim, not sub.full)
        return Complement(sub)

    def normal_at(self, p):
        return -self.inner.normal_at(p)

    def affine_cuts(self):
        return self.inner.affine_cuts()


#: overlap checks use this many samples; a disjoint union is rejected when the
#: overlap estimate exceeds four standard errors of zero
OVERLAP_SAMPLES = 100_000


@dataclass(frozen=True, eq=False)
class DisjointUnion(SetModel):
    """Union of two sets with ``gamma(left & right) = 0`` (validated by Monte Carlo)."""

    left: SetModel
    right: SetModel
    validate: bool = True
    overlap_estimate: float = field(default=0.0, compare=False)

    def __post_init__(self):
        if self.validate:
            est, se = overlap_mass(self.left, self.right)
            object.__setattr__(self, "overlap_estimate", est)
            if est > 4.0 * se:
                raise OverlapError(f"overlap mass {est:.3g} exceeds 4 stderr ({se:.3g})")

    @property
    def dim(self):
        return max(self.left.dim, self.right.dim)

    def contains(self, x):
        x = np.asarray(x, float)
        return self.left.contains(x) | self.right.contains(x)

    def support(self):
        return tuple(sorted(set(self.left.support()) | set(self.right.support())))

    def breakpoints(self, coord):
        out = []
        if coord < self.left.dim:
            out += self.left.breakpoints(coord)
        if coord < self.right.dim:
            out += self.right.breakpoints(coord)
        return out

    def fix(self, fixed, keep):
        parts = []
        for s in (self.left, self.right):
            parts.append(section_coords(s, fixed, keep))
        a, b = parts
        if isinstance(a, Trivial) and not a.full:
            return b
        if isinstance(b, Trivial) and not b.full:
            return a
        return DisjointUnion(a, b, validate=False)

    def normal_at(self, p):
        p = np.asarray(p, float)
        hits = []
        for s in (self.left, self.right):
            try:
                hits.append(_normal_padded(s, p, self.dim))
            except (NotOnBoundaryError, IndexError):
                continue
        if len(hits) == 1:
            return hits[0]
        if len(hits) == 2:
            if np.allclose(hits[0], -hits[1], atol=1e-10):
                raise NotOnBoundaryError("point is interior to the union")
            raise NonsmoothPointError("point lies where two boundaries meet")
        raise NotOnBoundaryError("point is not on the union boundary")

    def affine_cuts(self):
        def pad(cuts, d):
            return [(np.pad(a, (0, self.dim - d)), b) for a, b in cuts]

        return pad(self.left.affine_cuts(), self.left.dim) + pad(
            self.right.affine_cuts(), self.right.dim)


def _normal_padded(s, p, dim):
    n = s.normal_at(p[: s.dim])
    return np.pad(n, (0, dim - len(n)))


def section_coords(E: SetModel, fixed: dict, keep: Sequence[int]) -> SetModel:
    """``fix`` that tolerates coordinates beyond ``E.dim`` (treated as free)."""
    keep = list(keep)
    fixed_in = {c: v for c, v in fixed.items() if c < E.dim}
    inner_keep = [c for c in keep if c < E.dim]
    # coordinates below E.dim that are neither fixed nor kept must be irrelevant
    leftover = set(range(E.dim)) - set(fixed_in) - set(inner_keep)
    if leftover & set(E.support()):
        raise ValueError("section leaves set coordinates undetermined")
    for c in leftover:
        fixed_in[c] = 0.0
    if not inner_keep:
        return Trivial(len(keep), _contains_fixed(E, fixed_in))
    sub = E.fix(fixed_in, inner_keep)
    if len(inner_keep) == len(keep) and inner_keep == keep:
        return sub
    pos = tuple(keep.index(c) for c in inner_keep)
    return CylinderLift(sub, pos, len(keep)).simplify()


def overlap_mass(left: SetModel, right: SetModel, n: int = OVERLAP_SAMPLES):
    """Monte Carlo estimate and standard error of ``gamma(left & right)``."""
    dim = max(left.dim, right.dim)
    pts = sample_normal(GaussianSpace(dim), n, RngSeed(0x5EC7, 0))
    both = left.contains(pts[:, : left.dim]) & right.contains(pts[:, : right.dim])
    k = int(np.sum(both))
    p = k / n
    return p, math.sqrt(max(p * (1 - p), 0.0) / (n - 1)) if n > 1 else 0.0


def normal_at(E: SetModel, p) -> np.ndarray:
    """Inner unit normal of ``E`` at a boundary point ``p``."""
    return E.normal_at(np.asarray(p, float))


def contains(E: SetModel, x):
    out = E.contains(x)
    return bool(out) if np.ndim(out) == 0 else out

"""Sectioned Gauss quadrature for Gaussian probabilities of sets.

``set_probability(E, mean, scale)`` returns ``P(X in E)`` for independent
``X_i ~ N(mean_i, scale_i^2)``.  Halfspaces, boxes and balls with equal scales
reduce to closed forms or a one-dimensional integral; other sets are sliced
one coordinate at a time.  Each outer coordinate is integrated with
piecewise Gauss-Legendre rules split at the breakpoints of the current
section, so the only nonsmoothness the rules ever see sits at piece ends.
Pieces use an endpoint-clustering substitution, which also absorbs the
square-root behaviour of chord lengths at tangencies.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np
from scipy import optimize, special

from .core import TAIL, Estimate, legendre_rule, std_normal_pdf
from .sets import (Ball, Box, Complement, CylinderLift, DisjointUnion, Halfspace, SetModel,
                   SmoothLevelSet, Trivial, reduce_to_support, section_coords)

DEFAULT_ORDER = 24

#: grid used to bracket roots of level-set functions along a line
ROOT_GRID = 801


def interval_mass(lo, hi):
    """``Phi(hi) - Phi(lo)`` for standardized endpoints, evaluated on the accurate tail."""
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    upper = lo > 0
    a = np.where(upper, special.ndtr(-lo) - special.ndtr(-hi), special.ndtr(hi) - special.ndtr(lo))
    return np.where(hi > lo, np.maximum(a, 0.0), 0.0)


def _merge_cuts(values, lo, hi, gap=1e-9):
    """Sorted cut points inside ``(lo, hi)``; fixed splits yield to nearby true breaks."""
    vals = sorted(float(v) for v in values if lo < v < hi)
    out = []
    for v in vals:
        if out and v - out[-1] < gap:
            continue
        out.append(v)
    return out


def clustered_rule(a: float, b: float, order: int):
    """Gauss-Legendre on ``[a, b]`` after ``x = a + (b - a)(1 - cos(pi u)) / 2``.

    The substitution has vanishing derivative at both ends, so integrands
    with square-root endpoint behaviour become smooth.
    """
    x, w = legendre_rule(order)
    u = 0.5 * (x + 1.0)
    nodes = a + 0.5 * (b - a) * (1.0 - np.cos(math.pi * u))
    jac = 0.25 * (b - a) * math.pi * np.sin(math.pi * u)
    return nodes, w * jac


#: fixed splits (standardized units) so that smooth integrands are resolved too
BASE_SPLITS = (-6.0, -3.5, -1.75, 0.0, 1.75, 3.5, 6.0)


def normal_pieces(breaks: Sequence[float], order: int, lo: float = -TAIL, hi: float = TAIL):
    """Nodes and ``phi``-weights on ``[lo, hi]`` split at ``breaks`` (standardized units)."""
    cuts = _merge_cuts([*breaks, *BASE_SPLITS], lo, hi)
    edges = [lo, *cuts, hi]
    xs, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        if b - a <= 1e-14:
            continue
        x, w = clustered_rule(a, b, order)
        xs.append(x)
        ws.append(w * std_normal_pdf(x))
    if not xs:
        return np.empty(0), np.empty(0)
    return np.concatenate(xs), np.concatenate(ws)


# ---------------------------------------------------------------------------
# probabilities


def set_probability(E: SetModel, mean, scale, order: int = DEFAULT_ORDER) -> float:
    """``P(X in E)`` with ``X_i ~ N(mean_i, scale_i^2)`` independent."""
    mean = np.asarray(mean, float).reshape(-1)
    scale = np.broadcast_to(np.asarray(scale, float), mean.shape).astype(float)
    if len(mean) < E.dim:
        raise ValueError("mean is shorter than the set dimension")
    return float(min(1.0, max(0.0, _prob(E, mean[: E.dim], scale[: E.dim], order))))


def set_probability_estimate(E: SetModel, mean, scale, order: int = DEFAULT_ORDER) -> Estimate:
    """Like :func:`set_probability`, with the order-refinement delta as error."""
    q = set_probability(E, mean, scale, order)
    q1 = set_probability(E, mean, scale, order - 1)
    return Estimate(q, abs(q - q1), "quadrature", order)


def is_closed_form(E: SetModel) -> bool:
    """True when :func:`set_probability` never integrates numerically for ``E``."""
    if isinstance(E, (Trivial, Halfspace, Box)):
        return True
    if isinstance(E, Complement):
        return is_closed_form(E.inner)
    if isinstance(E, CylinderLift):
        return is_closed_form(E.base)
    if isinstance(E, DisjointUnion):
        return is_closed_form(E.left) and is_closed_form(E.right)
    return False


def _reduced(E, m, s, n):
    R, sup = reduce_to_support(E)
    if not sup:
        return 1.0 if R.full else 0.0
    idx = list(sup)
    return _prob(R, m[idx], s[idx], n)


def _prob(E, m, s, n):
    if isinstance(E, Trivial):
        return 1.0 if E.full else 0.0
    if isinstance(E, Complement):
        return 1.0 - _prob(E.inner, m, s, n)
    if isinstance(E, DisjointUnion):
        a = _reduced(E.left, m[: E.left.dim], s[: E.left.dim], n)
        b = _reduced(E.right, m[: E.right.dim], s[: E.right.dim], n)
        return a + b
    if isinstance(E, CylinderLift):
        idx = list(E.coords)
        return _reduced(E.base, m[idx], s[idx], n)
    if isinstance(E, Halfspace):
        h = E.direction
        spread = math.sqrt(float(np.sum((h * s) ** 2)))
        return float(special.ndtr((E.offset - h @ m) / spread))
    if isinstance(E, Box):
        return float(np.prod(interval_mass((E.lower - m) / s, (E.upper - m) / s)))
    if isinstance(E, Ball) and np.all(s == s[0]):
        return float(ball_probability(E.center, E.radius, m[None, :], s[0], n)[0])
    sup = E.support()
    if len(sup) < E.dim:
        return _reduced(E, m, s, n)
    if E.dim == 1:
        return _prob_line(E, m, s, n)
    if E.dim == 2 and E.convex:
        v, w = normal_pieces([(b - m[0]) / s[0] for b in E.breakpoints(0)], n)
        P = np.zeros((len(v), 2))
        P[:, 0] = m[0] + s[0] * v
        lo, hi = E.interval(P, 1)
        return float(np.dot(w, interval_mass((lo - m[1]) / s[1], (hi - m[1]) / s[1])))
    brk = [(b - m[0]) / s[0] for b in E.breakpoints(0)]
    if isinstance(E, SmoothLevelSet):
        # kink locations unknown: dice the line so every feature meets several nodes
        brk += list(np.arange(-TAIL, TAIL, 0.25))
    v, w = normal_pieces(brk, n)
    keep = list(range(1, E.dim))
    total = 0.0
    for vi, wi in zip(v, w):
        sub = E.fix({0: float(m[0] + s[0] * vi)}, keep)
        total += wi * _prob(sub, m[1:], s[1:], n)
    return total


def _prob_line(E, m, s, n):
    if E.convex:
        try:
            lo, hi = E.interval(np.zeros((1, 1)), 0)
            return float(interval_mass((lo[0] - m[0]) / s[0], (hi[0] - m[0]) / s[0]))
        except NotImplementedError:
            pass
    if isinstance(E, SmoothLevelSet):
        return _prob_level_line(E, m[0], s[0])
    # generic indicator along a line: piecewise rule between known breakpoints
    v, w = normal_pieces([(b - m[0]) / s[0] for b in E.breakpoints(0)], n)
    return float(np.dot(w, E.contains((m[0] + s[0] * v)[:, None])))


def _prob_level_line(E: SmoothLevelSet, m, s):
    v = np.linspace(-TAIL, TAIL, ROOT_GRID)

    def g(u):
        return np.asarray(E.g(np.atleast_1d(m + s * np.asarray(u, float))[:, None]), float)

    gv = g(v)
    roots = []
    for i in np.flatnonzero(np.sign(gv[:-1]) * np.sign(gv[1:]) < 0):
        roots.append(optimize.brentq(lambda u: float(g(u)[0]), v[i], v[i + 1], xtol=1e-14))
    edges = [-np.inf, *roots, np.inf]
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (max(a, -TAIL - 1) + min(b, TAIL + 1))
        if g(mid)[0] <= 0:
            total += float(interval_mass(a, b))
    return total


def ball_probability(center, radius, means, scale, order: int = 2 * DEFAULT_ORDER):
    """``P(|X - center| <= radius)`` for ``X ~ N(mean, scale^2 I)``, one row of ``means`` per query.

    Conditions on the radial part ``rho`` of the component orthogonal to
    ``mean - center`` (a chi variable with ``d - 1`` degrees of freedom); the
    remaining coordinate then falls in an interval.  Written so that no
    difference of large nearly-equal numbers is formed.
    """
    c = np.asarray(center, float)
    means = np.atleast_2d(np.asarray(means, float))
    d = len(c)
    R = radius / scale
    u = np.linalg.norm(means - c, axis=1) / scale
    if d == 1:
        return interval_mass(-R - u, R - u)
    top = min(R, TAIL)
    rho, wr = clustered_rule(0.0, top, order)
    k = d - 1
    logdens = (k - 1) * np.log(np.maximum(rho, 1e-300)) - 0.5 * rho**2 \
        - (0.5 * k - 1) * math.log(2.0) - special.gammaln(0.5 * k)
    dens = np.exp(logdens) * wr
    # half chord in the Z1 direction, and its offset from the center
    gap = (R - rho) * (R + rho)
    half = np.sqrt(np.maximum(gap, 0.0))
    U = u[:, None]
    hi = (gap - U**2) / (half + U)  # = half - u, cancellation free
    lo = -half - U
    return np.sum(dens * interval_mass(lo, hi), axis=1)


# ---------------------------------------------------------------------------
# iterated integrals with section-aware breakpoints


def section_breaks(sets: Sequence[SetModel], fixed: dict, coord: int):
    """Breakpoints in ``coord`` of every set after freezing ``fixed``."""
    out = []
    for S in sets:
        if coord >= S.dim:
            continue
        keep = [i for i in range(S.dim) if i not in fixed]
        sub = section_coords(S, {i: v for i, v in fixed.items() if i < S.dim}, keep)
        out.extend(sub.breakpoints(keep.index(coord)))
    return out


def iterated_integral(fn: Callable[[dict], float], coords: Sequence[int], sets: Sequence[SetModel],
                      stds=None, order: int = DEFAULT_ORDER, fixed: dict | None = None,
                      means=None, batch_fn=None) -> float:
    """``E[fn(Y)]`` for independent ``Y_c ~ N(means[c], stds[c]^2)``, ``c in coords``.

    ``fn`` receives a dict ``{coord: value}``.  Coordinates are fixed in the
    given order; before each one, the ``sets`` are sectioned by the values
    fixed so far and their breakpoints split the rule.  ``batch_fn(fixed, c,
    values)``, when given, evaluates the innermost coordinate for a whole
    array of values at once.
    """
    coords = list(coords)
    fixed = dict(fixed or {})
    if not coords:
        return float(fn(fixed))
    c = coords[0]
    sd = 1.0 if stds is None else float(stds[c])
    mu = 0.0 if means is None else float(means[c])
    brk = [(b - mu) / sd for b in section_breaks(sets, fixed, c)]
    v, w = normal_pieces(brk, order)
    if batch_fn is not None and len(coords) == 1:
        return float(np.dot(w, batch_fn(fixed, c, mu + sd * v)))
    total = 0.0
    for vi, wi in zip(v, w):
        nxt = dict(fixed)
        nxt[c] = float(mu + sd * vi)
        total += wi * iterated_integral(fn, coords[1:], sets, stds, order, nxt, means, batch_fn)
    return total


def iterated_nodes(coords: Sequence[int], sets: Sequence[SetModel], stds=None,
                   order: int = DEFAULT_ORDER, fixed: dict | None = None, means=None):
    """Nodes and weights of the rule :func:`iterated_integral` applies.

    Returns a list of ``{coord: value}`` dicts and a weight array, so that
    ``sum_j w_j fn(nodes_j)`` reproduces ``iterated_integral(fn, ...)``.
    Useful when ``fn`` is cheaper evaluated on all nodes at once.
    """
    coords = list(coords)
    fixed = dict(fixed or {})
    if not coords:
        return [fixed], np.ones(1)
    c = coords[0]
    sd = 1.0 if stds is None else float(stds[c])
    mu = 0.0 if means is None else float(means[c])
    brk = [(b - mu) / sd for b in section_breaks(sets, fixed, c)]
    v, w = normal_pieces(brk, order)
    nodes, weights = [], []
    for vi, wi in zip(v, w):
        nxt = dict(fixed)
        nxt[c] = float(mu + sd * vi)
        sub, sw = iterated_nodes(coords[1:], sets, stds, order, nxt, means)
        nodes.extend(sub)
        weights.append(wi * sw)
    return nodes, np.concatenate(weights)


# ---------------------------------------------------------------------------
# breakpoint carrier for intersections


def _hyperplanes(S):
    if isinstance(S, CylinderLift):
        out = []
        for a, b in _hyperplanes(S.base):
            full = np.zeros(S.dim)
            full[list(S.coords)] = a
            out.append((full, b))
        return out
    return [(np.asarray(a, float), float(b)) for a, b in S.affine_cuts()]


def _is_polyhedral(S):
    if isinstance(S, CylinderLift):
        return _is_polyhedral(S.base)
    return isinstance(S, (Halfspace, Box)) or type(S).__name__ == "Polytope"


class Intersection(SetModel):
    """``A & B``; its breakpoints include where the boundary of one crosses the other.

    Used only to steer quadrature: when a section integrand counts boundary
    points of ``A`` lying in ``B``, it jumps where ``dA`` meets ``dB``.
    """

    def __init__(self, A: SetModel, B: SetModel):
        # complements share their boundary, so only the inner set matters here
        while isinstance(A, Complement):
            A = A.inner
        while isinstance(B, Complement):
            B = B.inner
        self.A, self.B = A, B
        self.dim = max(A.dim, B.dim)

    def contains(self, x):
        x = np.asarray(x, float)
        return self.A.contains(x[..., : self.A.dim]) & self.B.contains(x[..., : self.B.dim])

    def support(self):
        return tuple(sorted(set(self.A.support()) | set(self.B.support())))

    def fix(self, fixed, keep):
        keep = list(keep)
        return Intersection(section_coords(self.A, {c: v for c, v in fixed.items() if c < self.A.dim}, keep),
                            section_coords(self.B, {c: v for c, v in fixed.items() if c < self.B.dim}, keep))

    def breakpoints(self, coord):
        out = []
        for S in (self.A, self.B):
            if coord < S.dim:
                out.extend(S.breakpoints(coord))
        d = self.dim
        if _is_polyhedral(self.A) and _is_polyhedral(self.B):
            rows = [(np.pad(a, (0, d - len(a))), b) for a, b in _hyperplanes(self.A) + _hyperplanes(self.B)]
            if rows:
                from .sets import Polytope
                P = Polytope(np.array([r[0] for r in rows]), np.array([r[1] for r in rows]))
                out.extend(P.breakpoints(coord))
            return out
        for ball, other in ((self.A, self.B), (self.B, self.A)):
            if isinstance(ball, Ball) and _is_polyhedral(other):
                out.extend(_ball_plane_extremes(ball, _hyperplanes(other), coord))
        return out


def _ball_plane_extremes(ball: Ball, planes, coord):
    """Extreme values of ``x[coord]`` on each circle where the sphere meets a plane."""
    out = []
    if coord >= ball.dim:
        return out
    c, r = ball.center, ball.radius
    for a, b in planes:
        a = a[: ball.dim]
        nrm = np.linalg.norm(a)
        if nrm == 0:
            continue
        a = a / nrm
        b = b / nrm
        off = b - a @ c
        if abs(off) >= r:
            continue
        rho = math.sqrt(r * r - off * off)
        q = c + off * a
        spread = rho * math.sqrt(max(0.0, 1.0 - a[coord] ** 2))
        out.extend([q[coord] - spread, q[coord] + spread])
    return out

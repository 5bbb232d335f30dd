"""Density-1/2 points, essential boundaries, pre-Hausdorff measures, the
union decomposition and the reduced-boundary functional."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import special
from scipy.stats import qmc

from .core import (Estimate, Frame, GaussianSpace, RngSeed, hermite_rule, sample_normal,
                   sqrt_one_minus_exp, tensor_rule, worker_count)
from .errors import (DimensionTooLargeError, GaussGMTError, SectionNotRectifiableError,
                     UnmeshableSetError)
from .mesh import SurfaceMesh, boundary_mesh, mesh_once
from .perimeter import SECTION_RESOLUTION, integrate_over_complement
from .quadrature import DEFAULT_ORDER, Intersection, iterated_nodes
from .semigroup import DEFAULT_POLICY, EvalPolicy, kernel_transport, mehler_batch
from .sets import (Complement, DisjointUnion, SetModel, Trivial, normal_at, reduce_to_support,
                   section, section_coords)

# ---------------------------------------------------------------------------
# time sequences

MIN_COUNT = 8


@dataclass(frozen=True)
class TimeSequence:
    """Strictly decreasing times ``t_i = t0 * ratio**i`` with summable square roots."""

    times: tuple[float, ...]
    rule: str = "geometric"
    t0: float = 0.25
    ratio: float = 0.25

    def __post_init__(self):
        t = np.asarray(self.times, float)
        if len(t) < MIN_COUNT:
            raise ValueError(f"a time sequence needs at least {MIN_COUNT} terms")
        if not (np.all(t > 0) and np.all(np.diff(t) < 0)):
            raise ValueError("times must be positive and strictly decreasing")

    def __len__(self):
        return len(self.times)

    @property
    def smallest(self) -> float:
        return self.times[-1]

    @property
    def sqrt_sum(self) -> float:
        """Partial sum of ``sqrt(t_i)`` over the stored terms."""
        return float(np.sum(np.sqrt(self.times)))

    @property
    def sqrt_sum_bound(self) -> float:
        """Sum of ``sqrt(t_i)`` over the whole infinite geometric sequence."""
        return math.sqrt(self.t0) / (1.0 - math.sqrt(self.ratio))

    def as_dict(self) -> dict:
        return {"rule": self.rule, "t0": self.t0, "ratio": self.ratio, "count": len(self),
                "sqrt_sum": self.sqrt_sum, "sqrt_sum_bound": self.sqrt_sum_bound}


def make_time_sequence(t0: float = 0.25, count: int = 10) -> TimeSequence:
    """Geometric sequence ``t0 * 4**-i``; ``sum sqrt(t_i) = 2 sqrt(t0)`` by the ratio test."""
    if not t0 > 0:
        raise ValueError("t0 must be positive")
    if t0 > 1:
        raise ValueError("t0 must not exceed 1")
    if count < MIN_COUNT:
        raise ValueError(f"count must be at least {MIN_COUNT}")
    return TimeSequence(tuple(t0 * 0.25**i for i in range(count)), "geometric", float(t0), 0.25)


# ---------------------------------------------------------------------------
# density-1/2 classification

INTERIOR, EXTERIOR, HALF, OTHER, UNDETERMINED = (
    "interior", "exterior", "density_half", "other", "undetermined")

#: how many trailing sequence terms decide a verdict
TAIL_TERMS = 3
#: default tolerance of term i in units of sqrt(t_i): boundary values approach
#: 1/2 like k sqrt(t) with k set by the curvature, so a fixed floor would reject
#: curved or off-center boundaries once the sequence is long
TOL_RATE = 2.0


@dataclass
class BoundaryClassification:
    point: np.ndarray
    estimates: tuple[Estimate, ...]
    limit_estimate: float
    verdict: str
    tol: float


def sequence_values(E, X, seq: TimeSequence, space: GaussianSpace,
                    policy: EvalPolicy = DEFAULT_POLICY, seed: RngSeed | None = None):
    """``T_{t_i} chi_E`` at every row of ``X``; arrays of shape ``(len(seq), n)``."""
    X = np.atleast_2d(np.asarray(X, float))
    seed = seed or RngSeed(0)

    def one(i):
        v, e, mode, n = mehler_batch(E, seq.times[i], X, space, policy, seed.child(i))
        return v, e, mode, n

    with ThreadPoolExecutor(max_workers=min(worker_count(), len(seq))) as pool:
        out = list(pool.map(one, range(len(seq))))
    vals = np.array([o[0] for o in out])
    errs = np.array([o[1] for o in out])
    return vals, errs, out[0][2], out[0][3]


def default_tolerance(errs_tail, times_tail):
    """Per-term tolerances for the trailing terms, shape ``(TAIL_TERMS, n)``."""
    errs_tail = np.asarray(errs_tail, float)
    rate = TOL_RATE * np.sqrt(np.asarray(times_tail, float))
    return np.maximum(10.0 * errs_tail.max(axis=0), rate[:, None])


def verdicts(vals, errs, seq: TimeSequence, tol=None):
    """Vectorized verdicts and limit estimates from sequence values.

    The returned tolerance is the one applied to the last term.
    """
    vals = np.asarray(vals, float)
    errs = np.asarray(errs, float)
    last, lerr = vals[-TAIL_TERMS:], errs[-TAIL_TERMS:]
    if tol is None:
        tol = default_tolerance(lerr, seq.times[-TAIL_TERMS:])
    else:
        tol = np.broadcast_to(np.asarray(tol, float), last.shape[1:])[None, :].repeat(TAIL_TERMS, axis=0)
    # sqrt(t) halves per step, so v ~ L + a sqrt(t) extrapolates to 2 v_n - v_{n-1}
    limit = np.clip(2.0 * vals[-1] - vals[-2], 0.0, 1.0)
    # rounding in the evaluation point alone moves values by ~eps |x| / sqrt(t)
    slack = 2.0 * lerr.max(axis=0) + 0.05 * tol[-1]

    def near(target):
        return np.all(np.abs(last - target) <= tol, axis=0)

    dev = np.abs(last - 0.5)
    settling = np.all(np.diff(dev, axis=0) <= slack, axis=0)
    steady = np.all(np.abs(np.diff(last, axis=0)) <= tol[:-1], axis=0)
    out = np.full(vals.shape[1], UNDETERMINED, dtype=object)
    out[steady & ~near(0.0) & ~near(1.0) & ~near(0.5)] = OTHER
    out[near(0.0)] = EXTERIOR
    out[near(1.0)] = INTERIOR
    out[near(0.5) & settling] = HALF
    out[lerr.max(axis=0) > tol[-1]] = UNDETERMINED
    return out, limit, tol[-1]


def classify_density_half(E: SetModel, points, seq: TimeSequence, policy: EvalPolicy = DEFAULT_POLICY,
                          seed: RngSeed | None = None, tol: float | None = None,
                          space: GaussianSpace | None = None) -> list[BoundaryClassification]:
    """Decide for each point whether ``T_{t_i} chi_E`` tends to 1/2 along ``seq``.

    The last three values must lie within ``tol`` of the target; for 1/2
    their distance to 1/2 must also be nonincreasing.  Values that settle
    elsewhere (corners) get the verdict ``other``; error bars wider than
    ``tol`` give ``undetermined``.
    """
    X = np.atleast_2d(np.asarray(points, float))
    space = space or GaussianSpace(X.shape[1])
    vals, errs, mode, n = sequence_values(E, X, seq, space, policy, seed)
    verdict, limit, tols = verdicts(vals, errs, seq, tol)
    out = []
    for j in range(len(X)):
        ests = tuple(Estimate(float(vals[i, j]), float(errs[i, j]), mode, n) for i in range(len(seq)))
        out.append(BoundaryClassification(X[j].copy(), ests, float(limit[j]), str(verdict[j]),
                                          float(tols[j])))
    return out


def _verdict_array(E, X, seq, space, policy, seed, tol=None):
    if len(X) == 0:
        return np.empty(0, dtype=object)
    vals, errs, _, _ = sequence_values(E, X, seq, space, policy, seed)
    return verdicts(vals, errs, seq, tol)[0]


# ---------------------------------------------------------------------------
# finite-dimensional essential boundaries

E0, E1, ESSENTIAL = "E0", "E1", "essential_boundary"
DEFAULT_RADII = (0.1, 0.03, 0.01, 0.003, 0.001)
#: densities within this distance of 0 or 1 count as 0 or 1
DENSITY_FLOOR = 0.02


@dataclass
class EssentialBoundaryResult:
    radii: tuple[float, ...]
    ratios: tuple[Estimate, ...]
    verdict: str


def _ball_directions(m, n, seed, rep):
    """Scrambled Sobol points mapped to the unit ball, with antithetic copies."""
    s = qmc.Sobol(m + 1, scramble=True, seed=seed.generator(rep))
    u = s.random(n)
    u = np.clip(u, 1e-12, 1 - 1e-12)
    g = special.ndtri(u[:, :m])
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    U = g * u[:, m:] ** (1.0 / m)
    return np.concatenate([U, -U])


def essential_boundary_finite(E: SetModel, x, radii: Sequence[float] = DEFAULT_RADII,
                              n: int = 4096, replicates: int = 8,
                              seed: RngSeed | None = None) -> EssentialBoundaryResult:
    """Lebesgue densities ``|B_r(x) & E| / |B_r(x)|`` along decreasing radii.

    Randomized quasi-Monte Carlo on the ball (``replicates`` independent
    scramblings give the error bar).  The verdict looks at the last three
    radii: all near 0 is ``E0``, all near 1 is ``E1``, all bounded away from
    both is the essential boundary, anything else is ``undetermined``.
    """
    x = np.asarray(x, float)
    m = len(x)
    if m > 4:
        raise DimensionTooLargeError("ball densities are limited to dim <= 4")
    if m != E.dim:
        raise ValueError(f"x must have {E.dim} coordinates")
    radii = tuple(float(r) for r in radii)
    if not all(r > 0 for r in radii) or any(b >= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be positive and strictly decreasing")
    seed = seed or RngSeed(0)
    reps = np.empty((replicates, len(radii)))
    for k in range(replicates):
        U = _ball_directions(m, n, seed, k)
        for i, r in enumerate(radii):
            reps[k, i] = np.mean(E.contains(x + r * U))
    mean = reps.mean(axis=0)
    err = reps.std(axis=0, ddof=1) / math.sqrt(replicates)
    ratios = tuple(Estimate(float(a), float(b), "monte_carlo", 2 * n * replicates)
                   for a, b in zip(mean, err))
    last, lerr = mean[-TAIL_TERMS:], err[-TAIL_TERMS:]
    delta = max(DENSITY_FLOOR, 4.0 * float(lerr.max()))
    if np.all(last <= delta):
        verdict = E0
    elif np.all(last >= 1.0 - delta):
        verdict = E1
    elif np.all((last > delta) & (last < 1.0 - delta)):
        verdict = ESSENTIAL
    else:
        verdict = UNDETERMINED
    return EssentialBoundaryResult(radii, ratios, verdict)


def cylindrical_essential_boundary(E: SetModel, F: Frame, x, radii: Sequence[float] = DEFAULT_RADII,
                                   seed: RngSeed | None = None) -> bool:
    """Whether ``z`` lies in the essential boundary of the section ``E_y``, ``x = (z, y)``."""
    x = np.asarray(x, float)
    if not isinstance(F, Frame):
        F = Frame.from_vectors(F)
    if len(x) != F.ambient:
        raise ValueError(f"x must have {F.ambient} coordinates")
    z, y = F.split(x)
    Ey = section(E, F, y)
    if isinstance(Ey, Trivial):
        return False
    R, sup = reduce_to_support(Ey)
    if isinstance(R, Trivial):
        return False
    res = essential_boundary_finite(R, np.asarray(z)[list(sup)], radii, seed=seed)
    return res.verdict == ESSENTIAL


# ---------------------------------------------------------------------------
# pre-Hausdorff measures

CARRIERS = ("essential", "density_half")


@dataclass
class PreHausdorffResult:
    F: Frame
    value: Estimate
    per_y_breakdown: list | None = None
    undetermined_mass: float = 0.0


def _as_frame(F, space):
    if not isinstance(F, Frame):
        F = Frame.from_vectors(F, space)
    if F.ambient != space.dim:
        raise ValueError("frame and space disagree in dimension")
    return F


def _section_points(E, B, nodes, G, ambient):
    """Boundary points of every ``y``-section with their ``G_m H^{m-1}`` weights.

    Returns ambient points, weights and the node index of each point.
    """
    G = list(G)
    core = E.inner if isinstance(E, Complement) else E
    if len(G) == 1 and core.convex and hasattr(core, "interval") and (B is None or B.convex):
        try:
            return _line_points(core, B, nodes, G[0], ambient)
        except NotImplementedError:
            pass
    pts, wts, idx = [], [], []
    for j, fixed in enumerate(nodes):
        Ey = section_coords(E, {c: v for c, v in fixed.items() if c < E.dim}, G)
        if isinstance(Ey, Trivial):
            continue
        By = None
        if B is not None:
            By = section_coords(B, {c: v for c, v in fixed.items() if c < B.dim}, G)
            if isinstance(By, Trivial):
                if not By.full:
                    continue
                By = None
        try:
            m = mesh_once(Ey, len(G), SECTION_RESOLUTION, By)
        except UnmeshableSetError as exc:
            raise SectionNotRectifiableError(str(exc)) from exc
        if len(m) == 0:
            continue
        # free section coordinates are already integrated out in the weights
        P = np.zeros((len(m), ambient))
        for c, v in fixed.items():
            P[:, c] = v
        P[:, [G[c] for c in m.coords]] = m.points
        pts.append(P)
        wts.append(m.weights)
        idx.append(np.full(len(m), j))
    if not pts:
        return np.zeros((0, ambient)), np.zeros(0), np.zeros(0, int)
    return np.concatenate(pts), np.concatenate(wts), np.concatenate(idx)


def _line_points(E, B, nodes, g, ambient):
    n = len(nodes)
    P = np.zeros((n, ambient))
    for j, fixed in enumerate(nodes):
        for c, v in fixed.items():
            P[j, c] = v
    if g >= E.dim:
        return np.zeros((0, ambient)), np.zeros(0), np.zeros(0, int)
    lo, hi = E.interval(P[:, : E.dim], g)
    pts, wts, idx = [], [], []
    for e in (lo, hi):
        good = (hi > lo) & np.isfinite(e)
        Q = P.copy()
        Q[:, g] = np.where(good, e, 0.0)
        if B is not None:
            good &= B.contains(Q[:, : B.dim])
        pts.append(Q[good])
        wts.append(np.exp(-0.5 * Q[good, g] ** 2) / math.sqrt(2 * math.pi))
        idx.append(np.flatnonzero(good))
    return np.concatenate(pts), np.concatenate(wts), np.concatenate(idx)


def pre_hausdorff(E: SetModel, F, space: GaussianSpace, carrier: str = "essential",
                  restrict_to: SetModel | None = None, seq: TimeSequence | None = None,
                  order: int = DEFAULT_ORDER, policy: EvalPolicy = DEFAULT_POLICY,
                  seed: RngSeed | None = None, breakdown: bool = False) -> PreHausdorffResult:
    """``H_F(B) = int_Y int_{B_y & C_y} G_m dH^{m-1} d gamma_Y(y)`` for a coordinate frame ``F``.

    With ``carrier="essential"`` the inner set is the boundary of the
    section; with ``carrier="density_half"`` its points are also filtered by
    :func:`classify_density_half` on the whole set.  Mass of points the
    classifier leaves undetermined or calls ``other`` is added to the error bar.
    """
    if carrier not in CARRIERS:
        raise ValueError(f"carrier must be one of {CARRIERS}")
    F = _as_frame(F, space)
    if not space.is_standard:
        raise ValueError("pre-Hausdorff measures are implemented for the standard Gaussian")
    G = list(F.coords)
    B = restrict_to
    seed = seed or RngSeed(0)
    base = integrate_over_complement(E, B, G, space, order, policy, seed)
    if carrier == "essential" and not breakdown:
        return PreHausdorffResult(F, base)
    deps = set(E.support()) | (set(B.support()) if B is not None else set())
    Y = [c for c in range(space.dim) if c not in G and c in deps]
    sets = [E] if B is None else [E, B, Intersection(E, B)]
    if len(Y) <= policy.quad_max_dim:
        nodes, w = iterated_nodes(Y, sets, {c: 1.0 for c in Y}, order, {})
    else:
        S = sample_normal(space, policy.mc_samples, seed.child(7), coords=Y)
        nodes = [dict(zip(Y, row)) for row in S]
        w = np.full(len(nodes), 1.0 / len(nodes))
    P, pw, idx = _section_points(E, B, nodes, G, space.dim)
    weight = pw * w[idx]
    keep = np.ones(len(P), bool)
    undetermined = 0.0
    if carrier == "density_half":
        seq = seq or make_time_sequence()
        v = _verdict_array(E, P, seq, space, policy, seed.child(11))
        keep = v == HALF
        # "other" points carry no perimeter, so their mass is discretization near corners
        undetermined = float(np.sum(weight[(v == UNDETERMINED) | (v == OTHER)]))
    value = float(np.sum(weight[keep]))
    table = None
    if breakdown:
        table = []
        per = np.bincount(idx[keep], weights=pw[keep], minlength=len(nodes))
        for j, fixed in enumerate(nodes):
            table.append({"y": {int(c): float(v) for c, v in fixed.items()},
                          "weight": float(w[j]), "section_mass": float(per[j])})
    est = Estimate(value, base.error + undetermined, base.method, base.samples)
    return PreHausdorffResult(F, est, table, undetermined)


@dataclass
class HausdorffSupResult:
    results: list[PreHausdorffResult]
    supremum: Estimate
    stabilization_index: int
    monotone: bool

    @property
    def values(self) -> list[float]:
        return [r.value.value for r in self.results]


def _agree(a: Estimate, b: Estimate, k: float = 4.0) -> bool:
    return abs(a.value - b.value) <= k * (a.error + b.error) + 1e-12 * max(1.0, abs(a.value))


def hausdorff_sup(E: SetModel, frames: Sequence, space: GaussianSpace, carrier: str = "essential",
                  restrict_to: SetModel | None = None, seq: TimeSequence | None = None,
                  order: int = DEFAULT_ORDER, policy: EvalPolicy = DEFAULT_POLICY,
                  seed: RngSeed | None = None) -> HausdorffSupResult:
    """``H_F`` along nested coordinate frames, its supremum and where it stabilizes.

    ``stabilization_index`` is 1-based: the first frame from which every
    later value agrees with the last one within four combined error bars.
    """
    frames = [_as_frame(F, space) for F in frames]
    if not frames:
        raise ValueError("at least one frame is required")
    for a, b in zip(frames, frames[1:]):
        if not set(a.coords) <= set(b.coords):
            raise ValueError("frames must be nested")
    seed = seed or RngSeed(0)
    results = [pre_hausdorff(E, F, space, carrier, restrict_to, seq, order, policy, seed.child(i))
               for i, F in enumerate(frames)]
    ests = [r.value for r in results]
    monotone = all(b.value >= a.value - 4.0 * (a.error + b.error) - 1e-12
                   for a, b in zip(ests, ests[1:]))
    top = max(ests, key=lambda e: e.value)
    stab = len(ests)
    for i in range(len(ests) - 1, -1, -1):
        if _agree(ests[i], ests[-1]):
            stab = i + 1
        else:
            break
    return HausdorffSupResult(results, top, stab, monotone)


def coordinate_frames(space: GaussianSpace, upto: int | None = None) -> list[Frame]:
    """``span(e_0) < span(e_0, e_1) < ...`` up to ``upto`` coordinates."""
    upto = space.dim if upto is None else upto
    return [Frame(tuple(range(k)), space.dim) for k in range(1, upto + 1)]


# ---------------------------------------------------------------------------
# representation formula


@dataclass
class RepresentationRow:
    test_set: SetModel | None
    perimeter: Estimate
    hausdorff: Estimate

    @property
    def difference(self) -> float:
        return abs(self.perimeter.value - self.hausdorff.value)

    @property
    def tolerance(self) -> float:
        return 4.0 * (self.perimeter.error + self.hausdorff.error) + 1e-12

    @property
    def ok(self) -> bool:
        return self.difference <= self.tolerance


def representation_check(E: SetModel, seq: TimeSequence, frames: Sequence, test_sets: Sequence,
                         space: GaussianSpace, resolution: int = 400, order: int = DEFAULT_ORDER,
                         policy: EvalPolicy = DEFAULT_POLICY,
                         seed: RngSeed | None = None) -> list[RepresentationRow]:
    """``|D chi_E|(B)`` from the perimeter mesh against ``H`` restricted to the density-1/2 set.

    ``None`` in ``test_sets`` stands for the whole space.
    """
    seed = seed or RngSeed(0)
    rows = []
    for i, B in enumerate(test_sets):
        mesh = boundary_mesh(E, space, resolution, restrict_to=B, allow_empty=True)
        lhs = Estimate(mesh.total_mass, mesh.tolerance, "quadrature", len(mesh))
        sup = hausdorff_sup(E, frames, space, "density_half", B, seq, order, policy, seed.child(i))
        rows.append(RepresentationRow(B, lhs, sup.supremum))
    return rows


# ---------------------------------------------------------------------------
# union of disjoint sets


@dataclass
class UnionReport:
    union_perimeter: float
    shared_points: int
    normal_cancellation: float
    skipped_normals: int
    triple_points: int
    additivity_residual: float
    additivity_tolerance: float
    decomposition_residual: float
    decomposition_tolerance: float
    details: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return (self.triple_points == 0 and self.normal_cancellation <= 1e-9
                and self.additivity_residual <= self.additivity_tolerance
                and self.decomposition_residual <= self.decomposition_tolerance)


def probe_functions(dim: int, count: int, seed: RngSeed):
    """Bounded smooth functions ``cos(<a, x> + b)`` with random frequencies."""
    rng = seed.generator()
    A = rng.standard_normal((count, dim)) / math.sqrt(dim)
    b = rng.uniform(0.0, 2 * math.pi, count)
    return [lambda X, a=a, c=c: np.cos(np.asarray(X, float) @ a + c) for a, c in zip(A, b)]


def _vector_moments(mesh: SurfaceMesh, funcs, mask=None):
    if len(mesh) == 0:
        return np.zeros((len(funcs), mesh.ambient))
    P, N, w = mesh.full_points(), mesh.full_normals(), mesh.weights
    if mask is not None:
        P, N, w = P[mask], N[mask], w[mask]
    return np.array([(w * f(P)) @ N for f in funcs])


def _split_mesh(A, other, space, resolution):
    """Mesh of ``dA`` with elements split along ``d other``, so selections by ``other`` are exact."""
    parts = [boundary_mesh(A, space, resolution, restrict_to=B, full=True, allow_empty=True)
             for B in (other, Complement(other))]
    parts = [m for m in parts if len(m)] or parts[:1]
    return SurfaceMesh.concat(parts)


def union_check(E: SetModel, F: SetModel, space: GaussianSpace, seq: TimeSequence | None = None,
                resolution: int = 200, n_test: int = 10, policy: EvalPolicy = DEFAULT_POLICY,
                seed: RngSeed | None = None) -> UnionReport:
    """Checks the decomposition of ``D chi_{E u F}`` for ``gamma(E & F) = 0``.

    Meshes of ``E``, ``F`` and the union are classified along ``seq``; no
    point may be a density-1/2 point of all three, normals must cancel where
    both ``E`` and ``F`` have density 1/2, and the vector measures are
    compared against ``n_test`` smooth test functions.
    """
    seq = seq or make_time_sequence()
    seed = seed or RngSeed(0)
    U = DisjointUnion(E, F)
    mE = _split_mesh(E, F, space, resolution)
    mF = _split_mesh(F, E, space, resolution)
    mU = boundary_mesh(U, space, resolution, full=True, allow_empty=True)
    PE, PF, PU = mE.full_points(), mF.full_points(), mU.full_points()
    vE = {name: _verdict_array(S, PE, seq, space, policy, seed.child(k))
          for k, (name, S) in enumerate((("E", E), ("F", F), ("U", U)))}
    vF = {name: _verdict_array(S, PF, seq, space, policy, seed.child(10 + k))
          for k, (name, S) in enumerate((("E", E), ("F", F), ("U", U)))}
    vU = _verdict_array(U, PU, seq, space, policy, seed.child(20))
    triple = int(np.sum((vE["E"] == HALF) & (vE["F"] == HALF) & (vE["U"] == HALF))
                 + np.sum((vF["E"] == HALF) & (vF["F"] == HALF) & (vF["U"] == HALF)))

    shared = np.flatnonzero((vE["E"] == HALF) & (vE["F"] == HALF))
    worst, skipped = 0.0, 0
    NE = mE.full_normals()
    for i in shared:
        try:
            nF = np.zeros(space.dim)
            got = normal_at(F, PE[i])
            nF[: len(got)] = got
        except GaussGMTError:
            skipped += 1
            continue
        worst = max(worst, float(np.linalg.norm(NE[i] + nF)))

    funcs = probe_functions(space.dim, n_test, seed.child(99))
    dU = _vector_moments(mU, funcs)
    dE = _vector_moments(mE, funcs)
    dF = _vector_moments(mF, funcs)
    add_res = float(np.max(np.abs(dU - dE - dF)))
    add_tol = 4.0 * (mU.tolerance + mE.tolerance + mF.tolerance) + 1e-12

    only_E = (vE["E"] == HALF) & (vE["F"] != HALF)
    only_F = (vF["F"] == HALF) & (vF["E"] != HALF)
    lhs = _vector_moments(mU, funcs, vU == HALF)
    rhs = _vector_moments(mE, funcs, only_E) + _vector_moments(mF, funcs, only_F)
    unsure = (np.sum(mU.weights[vU == UNDETERMINED]) if len(mU) else 0.0)
    unsure += np.sum(mE.weights[(vE["E"] == UNDETERMINED) | (vE["F"] == UNDETERMINED)]) if len(mE) else 0.0
    unsure += np.sum(mF.weights[(vF["E"] == UNDETERMINED) | (vF["F"] == UNDETERMINED)]) if len(mF) else 0.0
    dec_res = float(np.max(np.abs(lhs - rhs)))
    dec_tol = add_tol + 4.0 * float(unsure)
    return UnionReport(mU.total_mass, len(shared), worst, skipped, triple, add_res, add_tol,
                       dec_res, dec_tol,
                       {"perimeter_E": mE.total_mass, "perimeter_F": mF.total_mass,
                        "undetermined_mass": float(unsure)})


# ---------------------------------------------------------------------------
# reduced-boundary functional

#: below this log-density the scalar transport density underflows
LOG_TINY = math.log(np.finfo(float).tiny)


@dataclass
class ReducedBoundaryResult:
    h: np.ndarray
    defined: np.ndarray
    Th: np.ndarray
    Th_error: np.ndarray


def _h_values(mesh: SurfaceMesh, t: float, X, constant_normal: bool):
    X = np.atleast_2d(np.asarray(X, float))
    log_scale, S, V = kernel_transport(mesh, t, X)
    with np.errstate(divide="ignore"):
        logd = log_scale + np.log(S)
    defined = np.isfinite(logd) & (logd > LOG_TINY)
    if constant_normal:
        h = np.ones(len(X))
    else:
        h = np.clip(np.linalg.norm(V, axis=1) / np.where(S > 0, S, 1.0), 0.0, 1.0)
    return np.where(defined, h, np.nan), defined


def _is_constant(normals):
    return len(normals) > 0 and bool(np.all(normals == normals[0]))


def _smoothed_h(mesh, t, X, order, const):
    """``T_t h_t`` at rows of ``X`` by a tensor Gauss-Hermite rule in the mesh coordinates."""
    k = len(mesh.coords)
    x, w = hermite_rule(order)
    Z, W = tensor_rule([(x, w)] * k)
    Xc = np.atleast_2d(X)[:, list(mesh.coords)]
    sigma = float(sqrt_one_minus_exp(t))
    pts = (math.exp(-t) * Xc[:, None, :] + sigma * Z[None, :, :]).reshape(-1, k)
    full = np.zeros((len(pts), mesh.ambient))
    full[:, list(mesh.coords)] = pts
    h, ok = _h_values(mesh, t, full, const)
    h = np.where(ok, h, 0.0).reshape(len(Xc), -1)
    mass = (ok.reshape(len(Xc), -1) * W).sum(axis=1)
    return (h * W).sum(axis=1) / np.where(mass > 0, mass, 1.0)


def reduced_boundary_h(E: SetModel, t: float, x_batch, space: GaussianSpace,
                       policy: EvalPolicy = DEFAULT_POLICY, resolution: int = 200,
                       order: int = 20) -> ReducedBoundaryResult:
    """``h_t = |T_t^* D chi_E| / T_t^* |D chi_E|`` and its smoothing ``T_t h_t``.

    Points where the scalar density underflows are reported as undefined
    (``nan`` in ``h``).  A constant normal field gives ``h_t = 1`` exactly.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    X = np.atleast_2d(np.asarray(x_batch, float))
    mesh = boundary_mesh(E, space, resolution)
    const = _is_constant(mesh.normals)
    h, ok = _h_values(mesh, t, X, const)
    a = _smoothed_h(mesh, t, X, order, const)
    b = _smoothed_h(mesh, t, X, order - 1, const)
    return ReducedBoundaryResult(h, ok, a, np.abs(a - b))


def reduced_boundary_defect(E: SetModel, t: float, space: GaussianSpace, resolution: int = 100,
                            order: int = 20) -> Estimate:
    """``int |T_t h_t - 1| d|D chi_E|`` over the perimeter mesh."""
    if not t > 0:
        raise ValueError("t must be positive")
    mesh = boundary_mesh(E, space, resolution)
    const = _is_constant(mesh.normals)
    P = mesh.full_points()
    a = float(np.dot(mesh.weights, np.abs(_smoothed_h(mesh, t, P, order, const) - 1.0)))
    b = float(np.dot(mesh.weights, np.abs(_smoothed_h(mesh, t, P, order - 1, const) - 1.0)))
    return Estimate(a, abs(a - b) + mesh.tolerance, "quadrature", order)


# ---------------------------------------------------------------------------
# convergence to 1/2 on the perimeter measure

T_GRID = (0.2, 0.1, 0.05, 0.025, 0.0125)


def half_deviation(E: SetModel, t: float, space: GaussianSpace, policy: EvalPolicy = DEFAULT_POLICY,
                   seed: RngSeed | None = None, resolution: int = 200, power: int = 2,
                   mesh: SurfaceMesh | None = None) -> Estimate:
    """``int |T_t chi_E - 1/2|^power d|D chi_E|`` divided by ``|D chi_E|(X)``."""
    mesh = mesh or boundary_mesh(E, space, resolution)
    v, e, mode, n = mehler_batch(E, t, mesh.full_points(), space, policy, seed)
    d = np.abs(v - 0.5)
    total = mesh.total_mass
    val = float(np.dot(mesh.weights, d**power)) / total
    err = float(np.dot(mesh.weights, power * d ** (power - 1) * e)) / total
    # the outer integral is a mesh quadrature whatever evaluated T_t
    method = "quadrature" if mode == "closed_form" else mode
    return Estimate(val, err + mesh.tolerance / total * val, method, n)


def half_deviation_curve(E: SetModel, t_grid: Sequence[float], space: GaussianSpace,
                         policy: EvalPolicy = DEFAULT_POLICY, seed: RngSeed | None = None,
                         resolution: int = 200, power: int = 2) -> list[Estimate]:
    """:func:`half_deviation` along ``t_grid`` on one shared mesh."""
    seed = seed or RngSeed(0)
    mesh = boundary_mesh(E, space, resolution)
    return [half_deviation(E, t, space, policy, seed.child(i), resolution, power, mesh)
            for i, t in enumerate(t_grid)]


def sequence_monitor(E: SetModel, seq: TimeSequence, space: GaussianSpace,
                     policy: EvalPolicy = DEFAULT_POLICY, seed: RngSeed | None = None,
                     resolution: int = 200) -> np.ndarray:
    """Partial sums of ``int |T_{t_i} chi_E - 1/2| d|D chi_E|`` along the sequence."""
    mesh = boundary_mesh(E, space, resolution)
    terms = [half_deviation(E, t, space, policy, seed, resolution, 1, mesh).value * mesh.total_mass
             for t in seq.times]
    return np.cumsum(terms)

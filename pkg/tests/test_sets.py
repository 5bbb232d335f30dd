import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from gaussgmt.core import (Frame, GaussianSpace, RngSeed, gaussian_density, legendre_on, sample_normal,
                           tensor_rule)
from gaussgmt.errors import DegenerateSetError, NotOnBoundaryError, OverlapError
from gaussgmt.mesh import boundary_mesh
from gaussgmt.quadrature import iterated_nodes
from gaussgmt.sets import (Ball, Box, Complement, CylinderLift, DisjointUnion, Halfspace, Polytope,
                           SmoothLevelSet, Trivial, contains, normal_at, reduce_to_support, section)

BOX_PERIMETER = 4 * norm.pdf(1) * (norm.cdf(1) - norm.cdf(-1))


def test_contains_examples():
    assert contains(Halfspace([1, 0], 0.0), [-1, 5])
    assert not contains(Ball([0, 0], 1.0), [2, 0])
    C = CylinderLift(Box([-1], [1]), (3,), 10)
    x = np.full(10, 9.0)
    x[3] = 0.5
    assert contains(C, x)
    x[3] = 1.5
    assert not contains(C, x)


def test_halfspace_is_normalized():
    H = Halfspace([3.0, 4.0], 1.0)
    assert np.allclose(H.direction, [0.6, 0.8])
    with pytest.raises(ValueError):
        Halfspace([0, 0], 1.0)


def test_section_examples():
    B = Box([-1, -1], [1, 1])
    F = Frame((0,), 2)
    s = section(B, F, [0.5])
    assert contains(s, [0.9]) and not contains(s, [1.1])
    empty = section(B, F, [2.0])
    assert isinstance(empty, Trivial) and not empty.full
    H = Halfspace([1, 1], 0.0)
    for b in (-1.0, 0.3, 2.0):
        h = section(H, F, [b])
        z = np.linspace(-4, 4, 81)[:, None]
        assert np.array_equal(h.contains(z), z[:, 0] <= -b)


def test_normals_examples():
    assert np.allclose(normal_at(Halfspace([1, 0], 0.0), [0, 3]), [-1, 0])
    assert np.allclose(normal_at(Complement(Halfspace([1, 0], 0.0)), [0, 3]), [1, 0])
    assert np.allclose(normal_at(Ball([0, 0], 1.0), [1, 0]), [-1, 0])
    L = SmoothLevelSet(lambda X: X[:, 0] ** 3 + X[:, 1] - 1,
                       lambda X: np.column_stack([3 * X[:, 0] ** 2, np.ones(len(X))]), 2)
    n = normal_at(L, [0.0, 1.0])
    # finite-difference gradient oracle
    eps = 1e-6
    g = lambda p: p[0] ** 3 + p[1] - 1  # noqa: E731
    fd = np.array([(g([eps, 1]) - g([-eps, 1])) / (2 * eps), (g([0, 1 + eps]) - g([0, 1 - eps])) / (2 * eps)])
    assert np.allclose(n, -fd / np.linalg.norm(fd), atol=1e-8)
    with pytest.raises(NotOnBoundaryError):
        normal_at(Ball([0, 0], 1.0), [0.5, 0])


def test_disjoint_union_rejects_overlap():
    DisjointUnion(Halfspace([1, 0], 0.0), Complement(Halfspace([1, 0], 0.0)))
    with pytest.raises(OverlapError):
        DisjointUnion(Ball([0, 0], 1.0), Ball([0.5, 0], 1.0))


def test_reduce_to_support():
    C = CylinderLift(Box([-1, -2], [1, 2]), (1, 4), 6)
    R, sup = reduce_to_support(C)
    assert sup == (1, 4)
    X = sample_normal(GaussianSpace(6), 2000, RngSeed(1))
    assert np.array_equal(R.contains(X[:, [1, 4]]), C.contains(X))


def _random_set(rng, dim):
    kind = rng.integers(4)
    if kind == 0:
        return Halfspace(rng.normal(size=dim), rng.uniform(-1, 1))
    if kind == 1:
        return Box(rng.uniform(-2, -0.2, dim), rng.uniform(0.2, 2, dim))
    if kind == 2:
        return Ball(0.5 * rng.normal(size=dim), rng.uniform(0.5, 2))
    while True:
        V = 1.5 * rng.normal(size=(dim + 1, dim))
        if abs(np.linalg.det(V[1:] - V[0])) > 0.5:
            return Polytope.simplex(V)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 3))
def test_section_consistency(seed, dim):
    rng = np.random.default_rng(seed)
    E = _random_set(rng, dim)
    k = int(rng.integers(1, dim))
    F = Frame(tuple(sorted(rng.choice(dim, k, replace=False).tolist())), dim)
    for _ in range(5):
        y = rng.normal(size=dim - k) * 1.5
        s = section(E, F, y)
        Z = rng.normal(size=(20, k)) * 1.5
        X = F.assemble(Z, np.broadcast_to(y, (20, dim - k)))
        assert np.array_equal(np.asarray(s.contains(Z), bool), np.asarray(E.contains(X), bool))


def test_mesh_totals():
    sp = GaussianSpace(2)
    assert abs(boundary_mesh(Halfspace([1, 0], 0.0), sp, 200).total_mass - norm.pdf(0)) < 1e-6
    assert abs(boundary_mesh(Ball([0, 0], 1.0), sp, 400).total_mass - math.exp(-0.5)) < 1e-6
    assert abs(boundary_mesh(Box([-1, -1], [1, 1]), sp, 400).total_mass - BOX_PERIMETER) < 1e-6


def test_mesh_normals_unit_and_refinement():
    sp = GaussianSpace(3)
    for E in (Ball([0.2, 0, -0.1], 1.3), Box([-1, -0.5, -2], [1, 1, 0.5]),
              Polytope.simplex(np.array([[0, 0, 0], [2, 0, 0], [0, 2, 0], [0, 0, 2.0]]) - 0.5)):
        m = boundary_mesh(E, sp, 100)
        assert np.allclose(np.linalg.norm(m.normals, axis=1), 1.0, atol=1e-10)
        fine = boundary_mesh(E, sp, 200)
        assert abs(fine.total_mass - m.total_mass) < m.tolerance


def test_complement_mesh_shares_points():
    sp = GaussianSpace(2)
    E = Box([-1, -0.5], [2, 1])
    a = boundary_mesh(E, sp, 100)
    b = boundary_mesh(Complement(E), sp, 100)
    assert np.array_equal(a.points, b.points) and np.array_equal(a.weights, b.weights)
    assert np.array_equal(a.normals, -b.normals)


def test_empty_boundary_raises():
    with pytest.raises(DegenerateSetError):
        boundary_mesh(Box([-np.inf, -np.inf], [np.inf, np.inf]), GaussianSpace(2), 50)


def _gauss_green_parts(E, dim):
    if isinstance(E, Box):
        # tensor Gauss-Legendre over the box against the Gaussian density
        rules = [legendre_on(lo, hi, 40) for lo, hi in zip(E.lower, E.upper)]
        X, w = tensor_rule(rules)
        return X, w * gaussian_density(GaussianSpace(dim), X), boundary_mesh(E, GaussianSpace(dim), 200)
    nodes, w = iterated_nodes(list(range(dim)), [E], order=12)
    X = np.array([[d[c] for c in range(dim)] for d in nodes])
    keep = E.contains(X)
    return X[keep], w[keep], boundary_mesh(E, GaussianSpace(dim), 200)


@pytest.mark.parametrize("E", [Halfspace([1, 2], 0.3), Box([-1, -0.5], [0.7, 1.2]), Ball([0.3, -0.2], 1.1),
                               Polytope.simplex(np.array([[-1.0, -1], [2, -0.5], [0, 1.5]])),
                               Box([-1, -1, -1], [1, 0.5, 0.8])])
def test_gauss_green_pins_inner_normal(E):
    # int_E d_h phi - int_E phi h.x + int phi <nu, h> dmesh = 0 only for the inner normal
    rng = np.random.default_rng(3)
    X, w, m = _gauss_green_parts(E, E.dim)
    for _ in range(10):
        a = rng.normal(size=E.dim)
        b = rng.uniform(0, 2 * np.pi)
        h = rng.normal(size=E.dim)
        vol = np.dot(w, np.cos(X @ a + b) * (a @ h) - np.sin(X @ a + b) * (X @ h))
        surf = np.dot(m.weights, np.sin(m.points @ a + b) * (m.normals @ h))
        assert abs(vol + surf) < 1e-6 * (1 + np.linalg.norm(a)) * np.linalg.norm(h)
        assert abs(vol - surf) > 1e-3 or abs(surf) < 1e-3

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate
from scipy.stats import norm

from gaussgmt.core import Frame, GaussianSpace, RngSeed, sample_normal
from gaussgmt.errors import MeshNotAGraphError
from gaussgmt.lab.runner import make_graph
from gaussgmt.mesh import boundary_mesh
from gaussgmt.semigroup import (EvalPolicy, dual_apply, factorization_eval, graph_bound_check,
                                halfspace_closed_form, mehler_apply, mehler_batch, omega_bound)
from gaussgmt.sets import Ball, Box, Halfspace

QUAD = EvalPolicy(mode="quadrature")


def test_halfspace_boundary_is_exactly_half():
    for t in (1e-6, 0.01, 1.0, 7.0):
        assert mehler_apply(Halfspace([1, 0], 0.0), t, [0.0, 2.3], GaussianSpace(2)).value == 0.5


def test_halfspace_against_monte_carlo():
    E = Halfspace([1, 0], 1.0)
    exact = norm.cdf((1 - math.exp(-0.25)) / math.sqrt(1 - math.exp(-0.5)))
    assert abs(exact - 0.6378) < 1e-4
    cf = mehler_apply(E, 0.25, [1.0, -0.3], GaussianSpace(2))
    assert cf.method == "closed_form" and cf.value == pytest.approx(exact, abs=1e-15)
    mc = mehler_apply(E, 0.25, [1.0, -0.3], GaussianSpace(2), EvalPolicy(mode="monte_carlo", mc_samples=10**7),
                      RngSeed(1))
    assert abs(mc.value - exact) <= 4 * mc.error


def test_ball_quadrature_vs_monte_carlo():
    E, sp = Ball([0, 0], 1.0), GaussianSpace(2)
    q = mehler_apply(E, 0.1, [0.0, 0.0], sp, QUAD)
    m = mehler_apply(E, 0.1, [0.0, 0.0], sp, EvalPolicy(mode="monte_carlo", mc_samples=10**6), RngSeed(2))
    assert 1 - math.exp(-0.5) < q.value < 1
    assert abs(q.value - m.value) <= 4 * (q.error + m.error)


def test_auto_dispatch():
    x = np.zeros((1, 5))
    assert mehler_batch(Halfspace(np.ones(5), 0.2), 0.1, x, GaussianSpace(5))[2] == "closed_form"
    assert mehler_batch(Ball(np.zeros(3), 1.0), 0.1, x[:, :3], GaussianSpace(3))[2] == "quadrature"
    assert mehler_batch(Ball(np.zeros(5), 1.0), 0.1, x, GaussianSpace(5), seed=RngSeed(0))[2] == "monte_carlo"


def test_rejects_nonpositive_time():
    with pytest.raises(ValueError):
        mehler_apply(Halfspace([1], 0.0), 0.0, [0.0], GaussianSpace(1))


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-4, 3.0), st.lists(st.floats(-4, 4), min_size=2, max_size=2),
       st.floats(0.1, 2.0), st.floats(-1, 1))
def test_range_preserved(t, x, r, cx):
    v = mehler_apply(Ball([cx, 0.0], r), t, x, GaussianSpace(2), QUAD)
    assert 0.0 <= v.value <= 1.0


def test_semigroup_property_on_boxes():
    rng = np.random.default_rng(4)
    for dim in (1, 2, 3):
        E = Box(rng.uniform(-2, -0.3, dim), rng.uniform(0.3, 2, dim))
        sp = GaussianSpace(dim)
        x = rng.normal(size=dim)
        t, s = 0.2, 0.3
        direct = mehler_apply(E, t + s, x, sp)

        def inner(X, E=E, sp=sp):
            return mehler_batch(E, s, X, sp)[0]

        nested = mehler_apply(inner, t, x, sp, EvalPolicy(mode="quadrature", gh_order=24 if dim < 3 else 16))
        assert abs(direct.value - nested.value) <= direct.error + nested.error + 1e-10


def test_dual_apply_examples():
    sp = GaussianSpace(2)
    m = boundary_mesh(Halfspace([1, 0], 0.0), sp, 200)
    one = dual_apply(m, 0.3, lambda X: np.ones(len(X)), sp, QUAD)
    assert one.value == pytest.approx(m.total_mass, rel=1e-12)
    half = dual_apply(m, 0.3, Halfspace([1, 0], 0.0), sp)
    assert abs(half.value - m.total_mass / 2) <= half.error + 1e-12


def test_dual_apply_box_face_oracle():
    sp = GaussianSpace(2)
    t = 0.1
    m = boundary_mesh(Box([-1, -1], [1, 1]), sp, 400)
    got = dual_apply(m, t, lambda X: np.clip(X[:, 1], -8, 8), sp, QUAD).value
    e = math.exp(-t)
    # T_t of the (untruncated) coordinate function is e^{-t} x_2; truncation at 8 is invisible here
    g = lambda s: norm.pdf(s)  # noqa: E731
    vertical = 2 * g(1) * integrate.quad(lambda y: e * y * g(y), -1, 1)[0]
    horizontal = g(1) * e * 1 * (norm.cdf(1) - norm.cdf(-1)) + g(1) * e * (-1) * (norm.cdf(1) - norm.cdf(-1))
    assert abs(got - (vertical + horizontal)) < 1e-4


def test_factorization_examples():
    F = Frame((0,), 2)
    d, f = factorization_eval(Box([-1, -1], [1, 1]), F, 0.3, [0.2], [-0.4], QUAD)
    assert abs(d.value - f.value) <= 1e-8
    d, f = factorization_eval(lambda X: np.ones(len(np.atleast_2d(X))), F, 0.3, [0.2], [-0.4], QUAD)
    assert d.value == pytest.approx(1.0, abs=1e-14) and f.value == pytest.approx(1.0, abs=1e-14)


def test_factorization_on_products():
    F = Frame((1,), 2)
    t, z, y = 0.4, [0.3], [-1.1]

    def g(X):
        X = np.atleast_2d(X)
        return np.cos(X[:, 1]) * np.exp(-X[:, 0] ** 2)

    d, f = factorization_eval(g, F, t, z, y, QUAD)
    sp1 = GaussianSpace(1)
    tz = mehler_apply(lambda X: np.cos(X[:, 0]), t, z, sp1, QUAD)
    ty = mehler_apply(lambda X: np.exp(-X[:, 0] ** 2), t, y, sp1, QUAD)
    assert abs(d.value - tz.value * ty.value) <= d.error + tz.error + ty.error + 1e-12
    assert abs(d.value - f.value) <= d.error + f.error + 1e-12


def test_commutation_with_directional_derivative():
    sp = GaussianSpace(2)
    t, h, eps = 0.3, np.array([0.6, 0.8]), 1e-5

    def u(X):
        X = np.atleast_2d(X)
        return np.sin(X[:, 0]) * np.cos(0.5 * X[:, 1])

    def du(X):
        X = np.atleast_2d(X)
        return 0.6 * np.cos(X[:, 0]) * np.cos(0.5 * X[:, 1]) - 0.4 * np.sin(X[:, 0]) * np.sin(0.5 * X[:, 1])

    x = np.array([0.4, -0.7])
    Tu = lambda p: mehler_apply(u, t, p, sp, QUAD).value  # noqa: E731
    lhs = (Tu(x + eps * h) - Tu(x - eps * h)) / (2 * eps)
    rhs = math.exp(-t) * mehler_apply(du, t, x, sp, QUAD).value
    assert abs(lhs - rhs) < 1e-8


def _face_points(E, sp, count=50):
    P = boundary_mesh(E, sp, 200).points
    if isinstance(E, Box):
        P = P[np.all(np.abs(P) < 0.7, axis=1) | (np.abs(np.abs(P) - 1).max(axis=1) > 0.3)]
    P = P[np.linalg.norm(P, axis=1) < 3]
    return P[:: max(1, len(P) // count)][:count]


@pytest.mark.parametrize("E, C", [(Box([-1, -1], [1, 1]), 0.29), (Ball([0, 0], 1.0), 0.012)])
def test_convergence_to_half_away_from_corners(E, C):
    # C was fitted on t in {1e-1, ..., 1e-4} and frozen
    sp = GaussianSpace(2)
    P = _face_points(E, sp)
    for t in (0.1, 0.01, 1e-3, 1e-4):
        v = mehler_batch(E, t, P, sp)[0]
        assert np.max(np.abs(v - 0.5)) <= C * math.sqrt(t)


def test_halfspace_closed_form_vectorized():
    a = np.linspace(-2, 2, 5)
    v = halfspace_closed_form(0.5, a, 0.2)
    s = math.sqrt(1 - math.exp(-0.4))
    assert np.allclose(v, norm.cdf((0.5 - math.exp(-0.2) * a) / s), rtol=1e-14)


def test_omega_bound_examples():
    assert omega_bound(2, 2.0, 0.0) == 1.0
    # for m = 2 the tail integral is elementary: int_a^inf e^{-u^2/4} u du = 2 e^{-a^2/4}
    s, R = 60.0, 2.0
    oracle = (2 * math.pi / math.sqrt(2 * math.pi) * math.exp(R * R)
              * 2 * math.exp(s * s / 100 - (s / 4) ** 2 / 4) + math.exp(R * R - s * s / 20))
    assert omega_bound(2, R, s) == pytest.approx(oracle, rel=1e-9)
    assert omega_bound(2, R, 60.0) < 1e-6
    assert omega_bound(2, R, 80.0) < 1e-10
    for m in (2, 3, 4):
        for R in (1.0, 2.0, 3.0):
            vals = [omega_bound(m, R, s) for s in np.linspace(20, 80, 61)]
            assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))
            assert all(0 <= v <= 1 for v in vals)


@pytest.mark.parametrize("graph", ["segment", "sine"])
@pytest.mark.parametrize("t", [1e-2, 1e-3])
def test_graph_bound_holds(graph, t):
    X = sample_normal(GaussianSpace(2), 100, RngSeed(5))
    r = graph_bound_check(make_graph(graph).mesh(), t, X)
    assert r.all_ok and np.all(r.margins >= 0)


def test_graph_bound_far_points():
    X = np.array([[0.0, 1.5], [3.0, 0.0], [-2.5, -2.0]])
    r = graph_bound_check(make_graph("segment").mesh(), 1e-4, X)
    assert np.all(r.distance >= 1) and np.all(r.lhs < 1e-20) and r.all_ok


def test_graph_bound_needs_graph_mesh():
    m = boundary_mesh(Halfspace([1, 0], 0.0), GaussianSpace(2), 50)
    with pytest.raises(MeshNotAGraphError):
        graph_bound_check(m, 1e-3, np.zeros((1, 2)))

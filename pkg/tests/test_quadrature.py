import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate
from scipy.stats import norm

from gaussgmt.core import GaussianSpace, RngSeed, mc_integrate
from gaussgmt.quadrature import (ball_probability, clustered_rule, interval_mass, is_closed_form,
                                 iterated_integral, iterated_nodes, normal_pieces, set_probability,
                                 set_probability_estimate)
from gaussgmt.sets import Ball, Box, Complement, CylinderLift, DisjointUnion, Halfspace, Polytope

TRIANGLE = Polytope.simplex(np.array([[-1.0, -1], [2, -0.5], [0, 1.5]]))


def test_interval_mass_tails():
    assert interval_mass(-np.inf, np.inf) == 1.0
    assert interval_mass(1.0, 0.5) == 0.0
    # far upper tail must not cancel to zero
    assert interval_mass(9.0, 10.0) == pytest.approx(norm.sf(9) - norm.sf(10), rel=1e-10)


def test_clustered_rule_handles_sqrt_endpoints():
    x, w = clustered_rule(0.0, 1.0, 24)
    assert np.dot(w, np.sqrt(x * (1 - x))) == pytest.approx(math.pi / 8, rel=1e-10)
    assert np.sum(w) == pytest.approx(1.0, rel=1e-14)


def test_normal_pieces_total_mass():
    _, w = normal_pieces([0.3, -2.0], 24)
    assert np.sum(w) == pytest.approx(1.0, abs=1e-12)


def test_box_and_halfspace_probabilities():
    B = Box([-1, -0.5], [0.7, np.inf])
    m, s = np.array([0.2, -0.1]), np.array([0.5, 1.5])
    exact = ((norm.cdf((0.7 - 0.2) / 0.5) - norm.cdf((-1 - 0.2) / 0.5))
             * norm.sf((-0.5 + 0.1) / 1.5))
    assert set_probability(B, m, s) == pytest.approx(exact, rel=1e-13)
    H = Halfspace([3, 4], 1.0)
    sd = math.hypot(0.6 * 0.5, 0.8 * 1.5)
    assert set_probability(H, m, s) == pytest.approx(norm.cdf((1 - (0.6 * 0.2 - 0.8 * 0.1)) / sd), rel=1e-13)


def test_ball_probability_is_noncentral_chi2():
    from scipy.stats import ncx2
    c, r = np.array([0.4, -0.3]), 1.2
    for mean, s in (([0.0, 0.0], 1.0), ([1.0, 0.5], 0.6)):
        lam = np.sum((np.asarray(mean) - c) ** 2) / s**2
        ref = ncx2.cdf(r * r / s**2, 2, lam)
        assert set_probability(Ball(c, r), mean, s) == pytest.approx(ref, abs=1e-12)
        assert ball_probability(c, r, np.atleast_2d(mean), s)[0] == pytest.approx(ref, abs=1e-12)


def test_triangle_probability_against_scipy():
    V = np.array([[-1.0, -1], [2, -0.5], [0, 1.5]])

    def edge(p, q, x):
        return p[1] + (q[1] - p[1]) * (x - p[0]) / (q[0] - p[0])

    def lo(x):
        return edge(V[0], V[1], x)

    def hi(x):
        return edge(V[0], V[2], x) if x <= 0 else edge(V[2], V[1], x)

    ref = integrate.dblquad(lambda y, x: norm.pdf(x) * norm.pdf(y), -1, 2, lo, hi, epsabs=1e-13)[0]
    assert set_probability(TRIANGLE, [0, 0], 1.0) == pytest.approx(ref, abs=1e-10)
    est = set_probability_estimate(TRIANGLE, [0, 0], 1.0)
    assert abs(est.value - ref) <= est.error + 1e-10


def test_complement_union_and_lift():
    m = [0.1, 0.2, -0.3]
    B = Box([-1, -1], [1, 1])
    L = CylinderLift(B, (0, 2), 3)
    assert set_probability(L, m, 1.0) == pytest.approx(set_probability(B, [0.1, -0.3], 1.0), rel=1e-14)
    assert set_probability(Complement(L), m, 1.0) == pytest.approx(1 - set_probability(L, m, 1.0), abs=1e-15)
    U = DisjointUnion(Halfspace([1, 0], -1.0), Box([-0.5, -1], [0.5, 1]))
    assert set_probability(U, [0, 0], 1.0) == pytest.approx(
        norm.cdf(-1) + (norm.cdf(0.5) - norm.cdf(-0.5)) * (norm.cdf(1) - norm.cdf(-1)), rel=1e-13)


def test_is_closed_form():
    assert is_closed_form(Box([-1], [1]))
    assert is_closed_form(Complement(CylinderLift(Halfspace([1, 1], 0.0), (0, 3), 5)))
    assert not is_closed_form(Ball([0, 0], 1.0))
    assert not is_closed_form(DisjointUnion(Halfspace([1, 0], -3.0), TRIANGLE))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6))
def test_probability_matches_monte_carlo(seed):
    rng = np.random.default_rng(seed)
    while True:
        V = 1.5 * rng.normal(size=(3, 2))
        if abs(np.linalg.det(V[1:] - V[0])) > 0.5:
            break
    E = Polytope.simplex(V) if rng.random() < 0.5 else Ball(0.5 * rng.normal(size=2), rng.uniform(0.3, 2))
    q = set_probability(E, [0, 0], 1.0)
    mc = mc_integrate(GaussianSpace(2), lambda X: E.contains(X).astype(float), 200_000, RngSeed(seed))
    assert abs(q - mc.value) <= 5 * mc.error + 1e-9


def test_iterated_nodes_reproduce_iterated_integral():
    f = lambda d: math.cos(d[0] + 0.5 * d[1]) * (TRIANGLE.contains(np.array([[d[0], d[1]]]))[0])  # noqa: E731
    direct = iterated_integral(f, [0, 1], [TRIANGLE], order=12)
    nodes, w = iterated_nodes([0, 1], [TRIANGLE], order=12)
    assert len(nodes) == len(w)
    assert np.dot(w, [f(d) for d in nodes]) == pytest.approx(direct, rel=1e-13)


def test_iterated_integral_against_closed_form():
    # E[cos(Y0) Y1^2] = e^{-1/2}; the halfspace only contributes a breakpoint
    val = iterated_integral(lambda d: math.cos(d[0]) * d[1] ** 2, [0, 1], [Halfspace([1, 0], 0.5)],
                            order=20)
    inner = integrate.quad(lambda x: math.cos(x) * norm.pdf(x), -12, 12, points=[0.5], limit=200)[0]
    assert val == pytest.approx(inner, rel=1e-10)
    half = iterated_integral(lambda d: float(d[0] <= 0.5), [0], [Halfspace([1], 0.5)], order=20)
    assert half == pytest.approx(norm.cdf(0.5), rel=1e-12)

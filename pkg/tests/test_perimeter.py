import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate
from scipy.stats import ncx2, norm

from gaussgmt.core import Frame, GaussianSpace, RngSeed
from gaussgmt.perimeter import (gaussian_perimeter, perimeter_closed_form, poincare_check,
                                poincare_constant, section_identity_check, smoothed_tv)
from gaussgmt.semigroup import EvalPolicy
from gaussgmt.sets import Ball, Box, Complement, CylinderLift, Halfspace, Polytope

BOX_PERIMETER = 4 * norm.pdf(1) * (norm.cdf(1) - norm.cdf(-1))


@pytest.mark.parametrize("dim", [1, 2, 5])
def test_halfspace_perimeter_dimension_free(dim):
    for c in (0.0, 0.7):
        tot = gaussian_perimeter(Halfspace(np.eye(dim)[0], c), GaussianSpace(dim), 400).total
        assert abs(tot - norm.pdf(c)) < 1e-6
    assert abs(norm.pdf(0) - 0.398942) < 1e-6


def test_closed_form_perimeters():
    sp = GaussianSpace(2)
    assert abs(gaussian_perimeter(Ball([0, 0], 1.0), sp).total - math.exp(-0.5)) < 1e-5
    assert abs(gaussian_perimeter(Box([-1, -1], [1, 1]), sp).total - BOX_PERIMETER) < 1e-5
    assert abs(BOX_PERIMETER - 0.6607635) < 1e-6
    assert perimeter_closed_form(Ball([0, 0], 1.0)) == pytest.approx(math.exp(-0.5), rel=1e-14)
    assert perimeter_closed_form(Ball([0.5, 0], 1.0)) is None


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_closed_form_dispatch_matches_mesh(seed):
    rng = np.random.default_rng(seed)
    dim = int(rng.integers(1, 4))
    kind = int(rng.integers(4))
    if kind == 0:
        E = Halfspace(rng.normal(size=dim), rng.uniform(-2, 2))
    elif kind == 1:
        E = Box(rng.uniform(-2, -0.1, dim), rng.uniform(0.1, 2, dim))
    elif kind == 2:
        E = Ball(np.zeros(dim), rng.uniform(0.3, 2.5))
    else:
        E = Complement(CylinderLift(Box([-1.0], [rng.uniform(-0.5, 2)]), (dim - 1,), dim))
    ref = perimeter_closed_form(E)
    tot = gaussian_perimeter(E, GaussianSpace(dim), 100).total
    assert abs(tot - ref) < 1e-6


def test_complement_has_same_perimeter():
    sp = GaussianSpace(2)
    E = Polytope.simplex(np.array([[-1.0, -1], [2, -0.5], [0, 1.5]]))
    assert gaussian_perimeter(E, sp, 200).total == gaussian_perimeter(Complement(E), sp, 200).total


def test_section_identity_examples():
    sp = GaussianSpace(2)
    lhs, rhs = section_identity_check(Box([-1, -1], [1, 1]), Frame((0,), 2), None, sp)
    target = 2 * norm.pdf(1) * (norm.cdf(1) - norm.cdf(-1))
    assert abs(target - 0.3303817) < 1e-6
    assert abs(lhs.value - target) < 1e-5 and abs(rhs.value - target) < 1e-5
    lhs, rhs = section_identity_check(Halfspace([1, 0], 0.0), Frame((1,), 2), None, sp)
    assert lhs.value == 0 and rhs.value == 0
    lhs, rhs = section_identity_check(Halfspace([1, 1], 0.0), Frame((0,), 2), None, sp)
    assert abs(lhs.value - rhs.value) < 1e-5
    assert abs(lhs.value - norm.pdf(0) / math.sqrt(2)) < 1e-5


def test_section_identity_restricted_and_perp():
    sp = GaussianSpace(3)
    E = Polytope.simplex(np.array([[-1.0, -1, -1], [2, -0.5, 0], [0, 1.5, -0.5], [0.2, 0.1, 1.8]]))
    B = Ball([0.3, 0, 0], 1.5)
    for variant in ("F", "perp"):
        lhs, rhs = section_identity_check(E, Frame((1,), 3), None, sp, 200, variant=variant)
        assert abs(lhs.value - rhs.value) <= 4 * (lhs.error + rhs.error) + 1e-12
    sp2 = GaussianSpace(2)
    lhs, rhs = section_identity_check(Ball([0.2, -0.1], 1.2), Frame((1,), 2), Box([-0.5, -3], [3, 0.4]), sp2)
    assert abs(lhs.value - rhs.value) <= 4 * (lhs.error + rhs.error) + 1e-12
    with pytest.raises(ValueError):
        section_identity_check(E, Frame((1,), 3), B, sp, variant="diagonal")


def test_poincare_constant():
    t = 1e-6
    assert abs(poincare_constant(t) / (2 * math.sqrt(t / math.pi)) - 1) < 1e-3
    # e^{-s} / sqrt(1 - e^{-2s}) = (1 - s/2 + O(s^2)) / sqrt(2s): the integrand sits below its asymptote
    t = 0.01
    top = 2 * math.sqrt(t / math.pi)
    assert 0.99 * top <= poincare_constant(t) < top
    vals = [poincare_constant(t) for t in (0.01, 0.1, 0.5, 1.0, 3.0)]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    # direct quadrature in s (integrable endpoint singularity)
    ref = math.sqrt(2 / math.pi) * integrate.quad(lambda s: math.exp(-s) / math.sqrt(-math.expm1(-2 * s)),
                                                  0, 1.0, limit=200)[0]
    assert poincare_constant(1.0) == pytest.approx(ref, rel=1e-8)
    ref = math.sqrt(2 / math.pi) * integrate.quad(lambda s: math.exp(-s) / math.sqrt(-math.expm1(-2 * s)),
                                                  0, 0.01, limit=200)[0]
    assert poincare_constant(0.01) == pytest.approx(ref, rel=1e-8)


def test_poincare_halfspace_lhs_oracle():
    t = 0.1
    r = poincare_check(Halfspace([1, 0], 0.0), t, GaussianSpace(2), RngSeed(3), n=400_000)
    s = math.sqrt(-math.expm1(-2 * t))

    def integrand(x):
        T = norm.cdf((0 - math.exp(-t) * x) / s)
        return abs(T - (x <= 0)) * norm.pdf(x)

    lhs = integrate.quad(integrand, -10, 0, limit=200)[0] + integrate.quad(integrand, 0, 10, limit=200)[0]
    assert abs(r.lhs.value - lhs) <= 4 * r.lhs.error
    assert r.bound == pytest.approx(poincare_constant(t) * norm.pdf(0), rel=1e-6)
    assert r.holds()


@pytest.mark.parametrize("t", [0.01, 0.1, 1.0])
def test_poincare_box3(t):
    r = poincare_check(Box([-1, -1, -1], [1, 1, 1]), t, GaussianSpace(3), RngSeed(4), n=10**6, resolution=100)
    assert r.lhs.value <= r.bound + 4 * r.lhs.error
    assert r.strengthened.value >= 0


def test_smoothed_tv_halfspace():
    sp = GaussianSpace(2)
    for c in (0.0, 0.8):
        E = Halfspace([1, 0], c)
        for t in (0.5, 0.05):
            q = smoothed_tv(E, t, sp, EvalPolicy(mode="quadrature"), resolution=200)
            assert abs(q.value - math.exp(-t) * norm.pdf(c)) <= q.error + 1e-6
    assert smoothed_tv(Halfspace([1, 0], 0.0), 5.0, sp).value <= math.exp(-5) * norm.pdf(0) + 1e-15


def _ball_tv_oracle(t, r=1.0):
    """Radial profile of T_t chi_ball is a noncentral chi-square cdf; differentiate in rho."""
    e, s2 = math.exp(-t), -math.expm1(-2 * t)

    def F(rho):
        return ncx2.cdf(r * r / s2, 2, (e * rho) ** 2 / s2)

    def g(rho, h=1e-5):
        return abs(F(rho + h) - F(max(rho - h, 0.0))) / (rho + h - max(rho - h, 0.0)) * rho * math.exp(-rho * rho / 2)

    return integrate.quad(g, 0, 9, limit=400, points=[r])[0]


def test_smoothed_tv_ball_against_radial_oracle():
    sp = GaussianSpace(2)
    t = 0.05
    v = smoothed_tv(Ball([0, 0], 1.0), t, sp)
    assert abs(v.value - _ball_tv_oracle(t)) < 1e-4
    per = math.exp(-0.5)
    assert v.value <= math.exp(-t) * per


def test_smoothed_tv_increases_to_perimeter():
    sp = GaussianSpace(2)
    E = Box([-1, -1], [1, 1])
    vals = [smoothed_tv(E, t, sp, resolution=200).value for t in (1.0, 0.3, 0.1, 0.03)]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    for t, v in zip((1.0, 0.3, 0.1, 0.03), vals):
        assert v <= math.exp(-t) * BOX_PERIMETER + 1e-6

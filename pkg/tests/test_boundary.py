import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from gaussgmt.boundary import (CARRIERS, E0, E1, ESSENTIAL, EXTERIOR, HALF, INTERIOR, OTHER, T_GRID,
                               classify_density_half, coordinate_frames, cylindrical_essential_boundary,
                               essential_boundary_finite, half_deviation_curve, hausdorff_sup,
                               make_time_sequence, pre_hausdorff, reduced_boundary_defect,
                               reduced_boundary_h, representation_check, sequence_monitor, union_check)
from gaussgmt.core import Frame, GaussianSpace, RngSeed
from gaussgmt.mesh import boundary_mesh
from gaussgmt.sets import Ball, Box, Complement, CylinderLift, Halfspace, Polytope

SP2 = GaussianSpace(2)
SEQ = make_time_sequence()
BOX = Box([-1, -1], [1, 1])
BOX_PERIMETER = 4 * norm.pdf(1) * (norm.cdf(1) - norm.cdf(-1))


def test_time_sequence():
    s = make_time_sequence(0.25, 10)
    assert len(s) == 10 and s.times[0] == 0.25
    assert all(b == a / 4 for a, b in zip(s.times, s.times[1:]))
    assert s.sqrt_sum < s.sqrt_sum_bound == pytest.approx(1.0)
    assert make_time_sequence(1.0, 8).sqrt_sum == pytest.approx(2 * (1 - 2.0**-8), rel=1e-14)
    for bad in ((0.0, 10), (2.0, 10), (0.25, 5)):
        with pytest.raises(ValueError):
            make_time_sequence(*bad)


def test_classifier_on_halfspace():
    r = classify_density_half(Halfspace([1, 0], 0.0), [[0, 1.3], [-1, 0], [1, 0]], SEQ)
    assert [c.verdict for c in r] == [HALF, INTERIOR, EXTERIOR]
    assert all(e.value == 0.5 for e in r[0].estimates)


def test_classifier_on_box():
    r = classify_density_half(BOX, [[0, 0], [1, 0], [1, 1], [2, 0]], SEQ)
    assert [c.verdict for c in r] == [INTERIOR, HALF, OTHER, EXTERIOR]
    assert r[2].limit_estimate == pytest.approx(0.25, abs=1e-4)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.3, 2.0), st.floats(0.0, 2 * math.pi))
def test_smooth_boundary_points_have_density_half(r, theta):
    p = r * np.array([math.cos(theta), math.sin(theta)])
    assert classify_density_half(Ball([0, 0], r), [p], SEQ)[0].verdict == HALF


@pytest.mark.parametrize("x, verdict, ratio", [([0, 0], E1, 1.0), ([1, 1], ESSENTIAL, 0.25),
                                                ([1, 0], ESSENTIAL, 0.5), ([2, 0], E0, 0.0)])
def test_essential_boundary_ratios(x, verdict, ratio):
    res = essential_boundary_finite(BOX, x, seed=RngSeed(1))
    assert res.verdict == verdict
    for e in res.ratios:
        assert abs(e.value - ratio) <= 4 * e.error + 1e-3


def test_essential_boundary_rejects_bad_input():
    with pytest.raises(ValueError):
        essential_boundary_finite(BOX, [0, 0], radii=(0.1, 0.2, 0.05))
    with pytest.raises(ValueError):
        essential_boundary_finite(BOX, [0, 0, 0])


def test_cylindrical_essential_boundary():
    F = Frame((0,), 2)
    assert cylindrical_essential_boundary(BOX, F, [1, 0.3])
    assert not cylindrical_essential_boundary(BOX, F, [1, 2])
    assert not cylindrical_essential_boundary(BOX, F, [0, 0.3])


def test_pre_hausdorff_examples():
    H = Halfspace([1, 0], 0.3)
    assert pre_hausdorff(H, Frame((0,), 2), SP2).value.value == pytest.approx(norm.pdf(0.3), rel=1e-12)
    assert pre_hausdorff(H, Frame((1,), 2), SP2).value.value == 0.0
    full = pre_hausdorff(BOX, Frame((0, 1), 2), SP2).value
    assert full.value == pytest.approx(BOX_PERIMETER, rel=1e-10)
    with pytest.raises(ValueError):
        pre_hausdorff(BOX, Frame((0,), 2), SP2, carrier="reduced")
    assert set(CARRIERS) == {"essential", "density_half"}


def test_pre_hausdorff_density_half_carrier_accounts_for_corners():
    ess = pre_hausdorff(BOX, Frame((0,), 2), SP2).value
    half = pre_hausdorff(BOX, Frame((0,), 2), SP2, carrier="density_half").value
    assert half.value <= ess.value
    assert abs(half.value - ess.value) <= half.error + ess.error


def test_pre_hausdorff_breakdown_sums_to_value():
    r = pre_hausdorff(BOX, Frame((0,), 2), SP2, breakdown=True)
    total = sum(row["weight"] * row["section_mass"] for row in r.per_y_breakdown)
    assert total == pytest.approx(r.value.value, rel=1e-10)


def test_hausdorff_sup_stabilizes_at_support():
    sp = GaussianSpace(4)
    E = CylinderLift(BOX, (1, 2), 4)
    res = hausdorff_sup(E, coordinate_frames(sp), sp)
    assert res.values[0] == 0.0
    assert res.values[1] == pytest.approx(BOX_PERIMETER / 2, rel=1e-10)
    assert res.monotone and res.stabilization_index == 3
    assert res.supremum.value == pytest.approx(BOX_PERIMETER, rel=1e-10)
    with pytest.raises(ValueError):
        hausdorff_sup(E, [Frame((0, 1), 4), Frame((2,), 4)], sp)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10**6))
def test_hausdorff_values_nondecreasing_on_polytopes(seed):
    rng = np.random.default_rng(seed)
    while True:
        V = 1.5 * rng.normal(size=(4, 3))
        if abs(np.linalg.det(V[1:] - V[0])) > 1.0:
            break
    sp = GaussianSpace(3)
    res = hausdorff_sup(Polytope.simplex(V), coordinate_frames(sp), sp)
    assert res.monotone


def test_representation_rows():
    rows = representation_check(Ball([0.2, 0], 1.0), SEQ, coordinate_frames(SP2),
                                [None, Box([-3, 0], [3, 3])], SP2, 200)
    assert all(r.ok for r in rows)
    assert rows[1].perimeter.value == pytest.approx(rows[0].perimeter.value / 2, rel=1e-6)


def test_union_of_complementary_halfspaces_has_no_boundary():
    H = Halfspace([1, 0], 0.0)
    u = union_check(H, Complement(H), SP2, SEQ, 200, 5, seed=RngSeed(1))
    assert u.ok and u.union_perimeter == 0.0 and u.shared_points > 0
    assert u.details["perimeter_E"] == pytest.approx(norm.pdf(0), rel=1e-6)


def test_union_of_separated_balls_is_additive():
    u = union_check(Ball([-1.5, 0], 1.0), Ball([1.5, 0], 1.0), SP2, SEQ, 200, 5, seed=RngSeed(1))
    assert u.ok and u.shared_points == 0
    assert u.union_perimeter == pytest.approx(u.details["perimeter_E"] + u.details["perimeter_F"], rel=1e-9)


def test_reduced_boundary_h():
    X = np.random.default_rng(0).normal(size=(20, 2))
    r = reduced_boundary_h(Halfspace([1, 0], 0.0), 0.1, X, SP2)
    assert np.all(r.h == 1.0) and np.allclose(r.Th, 1.0)
    r = reduced_boundary_h(BOX, 0.1, X, SP2)
    assert r.defined.all()
    assert np.all((0 <= r.h) & (r.h <= 1)) and np.all((0 <= r.Th) & (r.Th <= 1 + 1e-12))
    with pytest.raises(ValueError):
        reduced_boundary_h(BOX, 0.0, X, SP2)


def test_reduced_boundary_defect_vanishes():
    assert reduced_boundary_defect(Halfspace([1, 1], 0.2), 0.1, SP2).value == 0.0
    for E in (BOX, Ball([0, 0], 1.0)):
        vals = [reduced_boundary_defect(E, t, SP2).value for t in (0.1, 0.01, 0.001)]
        assert vals[0] > vals[1] > vals[2]
    assert reduced_boundary_defect(BOX, 1e-3, SP2).value < 0.01


def test_corner_carries_no_perimeter():
    # mass of the mesh within distance r of a corner shrinks like r
    m = boundary_mesh(BOX, SP2, 400)
    d = np.linalg.norm(m.points - [1.0, 1.0], axis=1)
    near = [float(np.sum(m.weights[d < r])) for r in (0.2, 0.1, 0.05)]
    assert near[0] > near[1] > near[2]
    assert near[2] < 2 * 0.05 * 2 * norm.pdf(1) ** 2 / norm.pdf(0) * 1.1


def test_half_deviation_curve_and_monitor():
    curve = half_deviation_curve(Ball([0, 0], 1.0), T_GRID, SP2)
    vals = [e.value for e in curve]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    sums = sequence_monitor(Ball([0, 0], 1.0), SEQ, SP2)
    assert np.all(np.diff(sums) >= 0) and sums[-1] - sums[-2] < 1e-6

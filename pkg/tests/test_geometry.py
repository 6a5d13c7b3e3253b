import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import enclosing_radius_bounds, pair_line_halfwidth
from plslab.geometry import (
    Ball,
    BumpProfile,
    Box,
    Complement,
    ConstantProfile,
    Dilate,
    Empty,
    Full,
    GccBudget,
    HalfSpace,
    Intersection,
    Scale,
    SetTypeError,
    SmoothedSet,
    Strips,
    Threshold,
    Translate,
    Union,
    estimate_gcc,
    flatness,
    grid_indicator,
    grid_pattern,
    grid_profile,
    indicator,
    minimal_enclosing_ball,
    profile,
    segment_measure,
    set_from_dict,
    vertical_strips,
)
from plslab.lattice import TorusGrid
from plslab.suite import brute_force_gcc, strip_union_measure

L = 4.0
SMALL = GccBudget(centers=64, random_orientations=4, refine_steps=20, refine_candidates=2)


# ---------------------------------------------------------------- indicators


def _in(spec, point, L, eps=None):
    return bool(np.atleast_1d(indicator(spec, [point], L, eps=eps))[0])


def test_full_and_empty():
    x = np.random.default_rng(0).uniform(0, L, (50, 2))
    assert indicator(Full(), x, L).all()
    assert not indicator(Empty(), x, L).any()


def test_ball_is_closed_and_periodic():
    b = Ball([0.1, 0.1], 0.5)
    assert _in(b, [0.1, 0.1], L)
    assert _in(b, [0.6, 0.1], L)
    assert not _in(b, [1.1, 0.1], L)
    # the wrap-around image counts
    assert _in(b, [L - 0.2, 0.1], L)


def test_box_is_half_open():
    box = Box([0, 0], [1, 1])
    assert _in(box, [0.0, 0.5], L)
    assert not _in(box, [1.0, 0.5], L)


def test_union_with_complement_is_everything():
    x = np.random.default_rng(1).uniform(-3, 7, (200, 2))
    A = Union([Ball([1, 1], 0.7), Strips([1, 2], 0.2, 0.9)])
    assert indicator(A | ~A, x, L).all()
    assert not indicator(A & Complement(A), x, L).any()


def test_strips_membership():
    s = vertical_strips(1.0, 0.2)
    assert indicator(s, [[0.1, 3.0], [0.3, 3.0], [2.15, 0.0]], L).tolist() == [True, False, True]


def test_translate_and_scale():
    b = Ball([0.0, 0.0], 0.3)
    t = Translate(b, [1.0, 2.0])
    assert _in(t, [1.2, 2.0], L)
    # scaled by 2: radius 0.6 on the same torus
    s = Scale(b, 2.0)
    assert _in(s, [0.55, 0.0], L)
    assert not _in(s, [0.65, 0.0], L)


def test_halfspace():
    h = HalfSpace([1, 0], 2.0)
    assert indicator(h, [[2.5, 0], [1.5, 0]], L).tolist() == [True, False]


def test_dilation_is_open():
    d = Dilate(Box([1, 1], [2, 2]), 0.25)
    assert _in(d, [2.2, 1.5], L)
    assert not _in(d, [2.25, 1.5], L)
    assert not _in(d, [2.2, 2.2], L)  # corner: distance sqrt(0.08) > 0.25


def test_grid_dilation_matches_exact_distance():
    g = TorusGrid(2, L, 64)
    spec = grid_pattern(1.0, 0.2)
    exact = grid_indicator(Dilate(spec, 0.15), g)
    # a threshold set has no distance function, so this goes through morphology
    morph = grid_indicator(Dilate(Threshold(SmoothedSet(spec, 1.0, 1e-9), 0.5), 0.15), g)
    assert np.array_equal(exact, morph)


def test_profile_and_indicator_type_errors():
    bump = BumpProfile([1, 1], 0.5, amplitude=2.0)
    with pytest.raises(SetTypeError):
        indicator(bump, [1, 1], L)
    with pytest.raises(SetTypeError):
        profile(Ball([0, 0], 1), [0, 0], L)
    assert _in(bump, [1, 1], L, eps=1.5)
    assert profile(bump, [[1, 1]], L)[0] == pytest.approx(2.0)
    with pytest.raises(ValueError):
        ConstantProfile(-0.1)


def test_profile_bounds_hold_on_a_grid():
    g = TorusGrid(2, L, 32)
    sm = SmoothedSet(grid_pattern(1.0, 0.2), amplitude=0.7, ramp=0.1)
    v = grid_profile(sm, g)
    assert v.min() >= 0 and v.max() <= sm.gamma_max


def _random_tree(draw, depth=0):
    leaves = [
        lambda: Ball(draw(st.lists(st.floats(0, 4), min_size=2, max_size=2)), draw(st.floats(0.1, 1))),
        lambda: Box([0.5, 0.5], [0.5 + draw(st.floats(0, 2)), 1.5]),
        lambda: Strips([1.0, draw(st.floats(-1, 1))], 0.1, 1.0, draw(st.floats(0, 1))),
    ]
    if depth > 2 or draw(st.booleans()):
        return leaves[draw(st.integers(0, 2))]()
    op = draw(st.integers(0, 3))
    a = _random_tree(draw, depth + 1)
    if op == 0:
        return Union([a, _random_tree(draw, depth + 1)])
    if op == 1:
        return Intersection([a, _random_tree(draw, depth + 1)])
    if op == 2:
        return Complement(a)
    return Translate(a, [draw(st.floats(-2, 2)), 0.0])


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_set_serialization_round_trips(data):
    spec = _random_tree(data.draw)
    again = set_from_dict(spec.to_dict())
    assert again == spec
    x = np.random.default_rng(3).uniform(0, L, (100, 2))
    assert np.array_equal(indicator(spec, x, L), indicator(again, x, L))


def test_set_from_dict_errors():
    with pytest.raises(ValueError):
        set_from_dict({"type": "nope"})
    with pytest.raises(ValueError):
        set_from_dict({"radius": 1})


# ------------------------------------------------------------------- GCC


def test_gcc_of_full_space_is_one():
    for k in (1, 2):
        assert estimate_gcc(Full(), k, 1.5, d=2, L=L, budget=SMALL).gamma_hat == 1.0


def test_gcc_vertical_strips_finds_a_gap():
    est = estimate_gcc(vertical_strips(1.0, 0.2), 1, 2.0, d=2, L=L, budget=SMALL)
    assert est.gamma_hat <= 0.02
    # the witness really is a bad segment
    ratio = segment_measure(vertical_strips(1.0, 0.2), est.witness_center, est.witness_frame[0], 2.0, L)
    assert ratio == pytest.approx(est.gamma_hat, abs=2e-3)


def test_gcc_grid_pattern_against_brute_force():
    fams = [((1.0, 0.0), 0.2, 1.0, 0.0), ((0.0, 1.0), 0.2, 1.0, 0.0)]
    oracle = brute_force_gcc(fams, 2.0, 1.0, n_centers=48, n_angles=360)
    est = estimate_gcc(grid_pattern(1.0, 0.2), 1, 2.0, d=2, L=L, budget=SMALL)
    assert est.gamma_hat >= 0.05
    assert est.gamma_hat >= oracle * 0.8
    assert abs(est.gamma_hat - oracle) <= 0.2 * oracle


def test_gcc_rejects_bad_arguments():
    with pytest.raises(ValueError):
        estimate_gcc(Full(), 1, 1.0, d=2, L=L, budget=0)
    with pytest.raises(ValueError):
        estimate_gcc(Full(), 3, 1.0, d=2, L=L)
    with pytest.raises(ValueError):
        estimate_gcc(Full(), 1, 3.0, d=2, L=L)
    with pytest.raises(ValueError):
        GccBudget(refine_steps=5)


def test_gcc_is_seed_deterministic():
    a = estimate_gcc(grid_pattern(1.0, 0.2), 1, 2.0, d=2, L=L, budget=SMALL, seed=7)
    b = estimate_gcc(grid_pattern(1.0, 0.2), 1, 2.0, d=2, L=L, budget=SMALL, seed=7)
    assert a.to_dict() == b.to_dict()


def test_gcc_monotone_under_inclusion():
    small = grid_pattern(1.0, 0.15)
    big = grid_pattern(1.0, 0.3)
    a = estimate_gcc(small, 1, 2.0, d=2, L=L, budget=SMALL, seed=1).gamma_hat
    b = estimate_gcc(big, 1, 2.0, d=2, L=L, budget=SMALL, seed=1).gamma_hat
    assert a <= b + 0.01


def test_gcc_scaling():
    # side ell on E equals side 1 on E / ell
    ell = 2.0
    E = grid_pattern(1.0, 0.2)
    a = estimate_gcc(E, 1, ell, d=2, L=L, budget=SMALL, seed=2).gamma_hat
    b = estimate_gcc(Scale(E, 1 / ell), 1, 1.0, d=2, L=L / ell, budget=SMALL, seed=2).gamma_hat
    assert a == pytest.approx(b, abs=0.01)


def test_gcc_profile_is_thresholded():
    prof = SmoothedSet(vertical_strips(1.0, 0.2), 1.0, 0.05)
    est = estimate_gcc(prof, 1, 2.0, d=2, L=L, budget=SMALL, eps=0.5)
    assert est.eps == 0.5
    assert est.gamma_hat <= 0.02


def test_segment_measure_matches_analytic_intervals():
    rng = np.random.default_rng(5)
    E = grid_pattern(1.0, 0.2)
    fams = [((1.0, 0.0), 0.2, 1.0, 0.0), ((0.0, 1.0), 0.2, 1.0, 0.0)]
    c = rng.uniform(0, L, (20, 2))
    ang = rng.uniform(0, np.pi, 20)
    u = np.stack([np.cos(ang), np.sin(ang)], 1)
    exact = strip_union_measure(fams, c, u, 2.0) / 2.0
    approx = [segment_measure(E, ci, ui, 2.0, L, resolution=20000) for ci, ui in zip(c, u)]
    np.testing.assert_allclose(approx, exact, atol=5e-4)


# -------------------------------------------------------------- flatness


def test_flatness_trivial_examples():
    assert flatness([[0, 0], [1, 0], [2, 0]], 1) == 0.0
    assert flatness([[0, 0], [1, 0], [0, 1], [1, 1]], 1) == 0.5
    assert flatness([[3.0, 4.0]], 0) == 0.0
    with pytest.raises(Exception):
        flatness(np.zeros((0, 2)), 1)


@pytest.mark.parametrize("M", [8, 9, 24, 25])
def test_flatness_polygon_against_pair_oracle(M):
    R = 3.0
    th = 2 * np.pi * np.arange(M) / M
    pts = np.stack([R * np.cos(th), R * np.sin(th)], 1)
    v = flatness(pts, 1)
    assert v == pytest.approx(pair_line_halfwidth(pts), abs=1e-12)
    assert R * math.cos(math.pi / M) * (1 - 1e-12) <= v <= R


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(3, 25))
def test_width_matches_pair_oracle_on_random_sets(seed, n):
    pts = np.random.default_rng(seed).normal(size=(n, 2))
    assert flatness(pts, 1) == pytest.approx(pair_line_halfwidth(pts), abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 30), st.sampled_from([2, 3]))
def test_enclosing_ball_is_minimal_enough(seed, n, d):
    pts = np.random.default_rng(seed).normal(size=(n, d))
    center, r = minimal_enclosing_ball(pts)
    rmax, lower = enclosing_radius_bounds(pts, center)
    assert rmax <= r * (1 + 1e-9) + 1e-12
    assert r >= lower - 1e-12
    # a minimal ball cannot shrink by moving its center toward the farthest point
    far = pts[np.argmax(np.linalg.norm(pts - center, axis=1))]
    assert np.max(np.linalg.norm(pts - (center + 1e-3 * (far - center)), axis=1)) >= r - 1e-9


def test_flatness_invariant_under_rigid_motion():
    pts = np.random.default_rng(8).normal(size=(30, 2))
    a = 0.7
    rot = np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])
    moved = pts @ rot.T + [5.0, -2.0]
    for codim in (0, 1):
        assert flatness(moved, codim) == pytest.approx(flatness(pts, codim), abs=1e-12)


def test_flatness_3d_planes_and_lines():
    rng = np.random.default_rng(9)
    # points in a slab of half-thickness 0.1 around z = 0
    pts = np.c_[rng.uniform(-1, 1, (200, 2)), rng.uniform(-0.1, 0.1, 200)]
    diam = 2 * np.sqrt(2.2)
    v = flatness(pts, 2)
    assert 0 < v <= 0.1 + 0.02 * diam
    # a segment along a random axis, thickened slightly
    u = rng.normal(size=3)
    u /= np.linalg.norm(u)
    line = np.outer(np.linspace(-1, 1, 50), u)
    assert flatness(line, 1) <= 0.02 * 2
    assert flatness(line, 2) <= 0.02 * 2


def test_flatness_unchanged_by_points_on_the_best_line():
    pts = np.array([[0, 0], [4, 0], [0, 1], [4, 1], [2, 0.2]])
    base = flatness(pts, 1)
    assert flatness(np.vstack([pts, [[1.0, 0.5]]]), 1) == pytest.approx(base, abs=1e-12)

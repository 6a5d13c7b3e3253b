import math

import numpy as np
import pytest

from oracles import ellipse_distance
from plslab.errors import EmptyRegionError, NyquistError
from plslab.geometry import flatness
from plslab.lattice import TorusGrid
from plslab.spectra import (
    Annulus,
    Ball,
    Circle,
    ClosedSpline,
    Ellipse,
    ManifoldShell,
    Sphere,
    Strip,
    manifold_distance,
    mask_flatness,
    mask_points,
    region_from_dict,
    region_mask,
)


@pytest.fixture
def grid():
    return TorusGrid(2, 2 * np.pi, 64)


def _member(mask, grid, m):
    return bool(mask.flat[grid.flat_index(m)])


def test_annulus_contains_its_radius(grid):
    k = 2 * np.pi / grid.L
    mask = region_mask(Annulus(5 * k, 0.5 * k), grid)
    assert _member(mask, grid, (5, 0))
    assert _member(mask, grid, (3, 4))
    assert not _member(mask, grid, (4, 0))


def test_zero_width_strip_is_a_hyperplane(grid):
    mask = region_mask(Strip(1, 0.0), grid)
    pts = mask_points(mask, grid)
    assert np.all(pts[:, 0] == 0)
    assert len(pts) == grid.N


def test_circle_shell_equals_annulus(grid):
    R, beta = 11.3, 0.8
    ann = region_mask(Annulus(R, beta), grid)
    exact = region_mask(ManifoldShell(Circle(), R, beta, distance="exact"), grid)
    sampled = region_mask(ManifoldShell(Circle(), R, beta), grid)
    assert np.array_equal(ann, exact)
    # sampled distance may only disagree inside the documented slack
    r = np.linalg.norm(grid.xi, axis=-1)
    diff = ann != sampled
    assert np.all(np.abs(np.abs(r[diff] - R) - beta) <= beta / 100)


def test_ellipse_distance_against_fine_sampling():
    rng = np.random.default_rng(0)
    x = rng.uniform(-4, 4, (40, 2))
    got = manifold_distance(Ellipse(1.0, 0.5), 3.0, x, tol=1e-4)
    ref = ellipse_distance(3.0, 1.5, x)
    np.testing.assert_allclose(got, ref, atol=1e-4)


def test_spline_shell_contains_its_control_points():
    pts = [[1, 0], [0, 1], [-1, 0], [0, -1.2]]
    curve = ClosedSpline(pts)
    d = manifold_distance(curve, 5.0, 5.0 * np.array(pts, float), tol=1e-4)
    assert np.all(d <= 1e-4)


def test_sphere_shell_3d():
    g = TorusGrid(3, 2 * np.pi, 16)
    mask = region_mask(ManifoldShell(Sphere(), 5.0, 0.5, distance="exact"), g)
    assert np.array_equal(mask, region_mask(Annulus(5.0, 0.5), g))
    with pytest.raises(ValueError):
        region_mask(ManifoldShell(Sphere(), 5.0, 0.5), TorusGrid(2, 2 * np.pi, 16))


def test_nyquist_and_empty_errors(grid):
    with pytest.raises(NyquistError, match="R\\+beta"):
        region_mask(Annulus(31.8, 0.5), grid)
    with pytest.raises(NyquistError):
        region_mask(Strip(1, 40.0), grid)
    with pytest.raises(EmptyRegionError):
        region_mask(Annulus(5.5, 0.1), grid)


def test_annulus_mask_has_lattice_symmetries(grid):
    mask = region_mask(Annulus(9.7, 1.3), grid)
    pts = {tuple(p) for p in np.round(mask_points(mask, grid)).astype(int)}
    assert pts == {(-a, b) for a, b in pts}
    assert pts == {(b, a) for a, b in pts}


@pytest.mark.parametrize(
    "small, big",
    [
        (Annulus(10, 0.5), Annulus(10, 1.0)),
        (Strip(1, 1.0), Strip(1, 2.5)),
        (ManifoldShell(Ellipse(1, 0.6), 12, 0.6), ManifoldShell(Ellipse(1, 0.6), 12, 1.2)),
    ],
)
def test_masks_nest(grid, small, big):
    a, b = region_mask(small, grid), region_mask(big, grid)
    assert not np.any(a & ~b)


def test_annulus_grows_like_a_shell_and_ball_like_a_volume():
    g = TorusGrid(2, 2 * np.pi, 256)
    n = {R: region_mask(Annulus(R, 1.0), g).sum() for R in (20, 40, 80)}
    b = {R: region_mask(Ball(R), g).sum() for R in (20, 40, 80)}
    for R in (20, 40):
        assert 1 <= n[2 * R] / n[R] <= 4  # within a factor 2 of 2^(d-1)
        assert 2 <= b[2 * R] / b[R] <= 8  # within a factor 2 of 2^d


def test_region_round_trip():
    for region in (
        Annulus(3.0, 0.5),
        Ball(2.0),
        Strip(1, 0.3, ((0.0, 1.0), (1.0, 0.0))),
        ManifoldShell(Ellipse(1.0, 0.4), 5.0, 0.2),
    ):
        assert region_from_dict(region.to_dict()) == region
    with pytest.raises(ValueError):
        region_from_dict({"type": "torus"})


def test_strip_flatness_is_at_most_beta(grid):
    mask = region_mask(Strip(1, 2.0), grid)
    assert mask_flatness(mask, grid, 1) <= 2.0


def test_single_point_flatness_is_zero(grid):
    mask = np.zeros(grid.shape, bool)
    mask.flat[grid.flat_index((3, 1))] = True
    assert mask_flatness(mask, grid, 0) == 0.0


def test_empty_restriction_raises(grid):
    mask = region_mask(Annulus(10, 0.5), grid)
    with pytest.raises(EmptyRegionError):
        mask_flatness(mask, grid, 1, center=(0, 0), radius=2.0)
    with pytest.raises(ValueError):
        mask_flatness(mask, grid, 1, center=(0, 0))


@pytest.mark.parametrize("theta", [0.6, 0.8])
def test_annulus_arc_flatness_matches_the_sagitta(theta):
    # lattice spacing 1/16, well below beta, so the arc is a thick circular band
    g = TorusGrid(2, 2 * np.pi * 16, 1024)
    R, beta = 20.0, 0.25
    pts = mask_points(region_mask(Annulus(R, beta), g), g)
    arc = pts[np.abs(np.arctan2(pts[:, 1], pts[:, 0])) <= theta / 2]
    # half the width of the slab spanned by a thick arc
    oracle = ((R + beta) - (R - beta) * math.cos(theta / 2)) / 2
    assert flatness(arc, 1) == pytest.approx(oracle, rel=0.10)


def test_annulus_caps_flatten_relative_to_radius():
    # a ball of fixed radius around a point of the circle sees a flatter cap as R grows
    g = TorusGrid(2, 2 * np.pi * 8, 1024)
    vals = []
    for R in (10.0, 20.0, 40.0):
        mask = region_mask(Annulus(R, 0.25), g)
        vals.append(mask_flatness(mask, g, 1, center=(R, 0.0), radius=6.0))
    assert vals[0] > vals[1] > vals[2]

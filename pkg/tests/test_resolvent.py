import numpy as np
import pytest

from oracles import dense_gram_explicit
from plslab.errors import ConfigError, ConvergenceError, NyquistError
from plslab.geometry import Box, Empty, Full, HalfSpace, grid_pattern
from plslab.lattice import TorusGrid, forward_transform
from plslab.resolvent import (
    ResolventProblem,
    band_lambda_min,
    check_lambda_grid,
    lambda_grid,
    resolvent_matvec,
    resolvent_weight,
    uniform_lower_bound,
)

L = 2 * np.pi


@pytest.fixture
def grid():
    return TorusGrid(2, L, 16)


def _full_dense(problem, lam):
    """``H_lambda`` on every lattice mode, built entry by entry."""
    g = problem.grid
    everything = np.ones(g.shape, bool)
    H = dense_gram_explicit(g, everything, problem.chi)
    H[np.diag_indices_from(H)] += problem.diagonal(lam).ravel()
    return H


def test_weight_values():
    assert resolvent_weight(3.0, 1.0) == 1.0
    assert resolvent_weight(7.3, 2.0) == pytest.approx(1 / 8.3)
    assert resolvent_weight(3.0, 0.5) == pytest.approx(4.0**2)


def test_full_space_at_a_symbol_value(grid):
    p = ResolventProblem(grid, 2.0, Full())
    sig = float(p.sigma.flat[grid.flat_index((1, 2))])
    res = band_lambda_min(p, sig)
    assert res.lambda_min == pytest.approx(1.0)
    assert res.method == "diagonal"


def test_empty_set_annihilates_a_resonant_mode(grid):
    p = ResolventProblem(grid, 1.0, Empty())
    sig = float(p.sigma.flat[grid.flat_index((3, 0))])
    assert band_lambda_min(p, sig).lambda_min == pytest.approx(0.0, abs=1e-14)


def test_single_mode_diagonal_entry(grid):
    p = ResolventProblem(grid, 1.0, HalfSpace([1, 0], L / 2))
    lam = 2.7
    m = (2, -1)
    e = grid.plane_wave(m)
    He = resolvent_matvec(p, lam, e)
    entry = np.vdot(e, He)
    sig = p.sigma.flat[grid.flat_index(m)]
    assert entry.real == pytest.approx(p.weight(lam) * (sig - lam) ** 2 + 0.5, abs=1e-12)
    assert abs(entry.imag) < 1e-14


def test_matvec_is_hermitian(grid):
    p = ResolventProblem(grid, 1.5, grid_pattern(L / 4, 0.4), delta=0.1)
    rng = np.random.default_rng(0)
    u = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    v = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    a = np.vdot(v, resolvent_matvec(p, 4.0, u))
    b = np.vdot(resolvent_matvec(p, 4.0, v), u)
    assert abs(a - b) <= 1e-12 * abs(a)
    with pytest.raises(ValueError):
        resolvent_matvec(p, -1.0, u)


@pytest.mark.parametrize("s, lam", [(2.0, 5.0), (2.0, 17.5), (1.0, 3.2), (0.5, 2.0)])
def test_band_enclosure_contains_the_full_dense_answer(grid, s, lam):
    p = ResolventProblem(grid, s, grid_pattern(L / 4, 0.4), delta=0.1)
    exact = np.linalg.eigvalsh(_full_dense(p, lam))[0]
    res = band_lambda_min(p, lam, K0=2.0)
    assert res.lower - 1e-10 <= exact <= res.lambda_min + 1e-10
    assert res.lambda_min - res.lower <= 1e-2 * res.lambda_min + 1e-12
    # the answer is within 10% of a full computation
    assert res.lambda_min == pytest.approx(exact, rel=0.10)


def test_band_blocks_do_not_change_the_answer(grid):
    p = ResolventProblem(grid, 2.0, grid_pattern(L / 4, 0.4), delta=0.1)
    assert p.residue_key is not None
    a = band_lambda_min(p, 9.0, use_symmetry=True)
    b = band_lambda_min(p, 9.0, use_symmetry=False)
    assert a.lambda_min == pytest.approx(b.lambda_min, abs=1e-10)


def test_dense_and_iterative_bands_agree(grid):
    p = ResolventProblem(grid, 2.0, Box([0.5, 0.5], [2.5, 4.0]))
    a = band_lambda_min(p, 9.0, method="dense")
    b = band_lambda_min(p, 9.0, method="iterative")
    assert a.lambda_min == pytest.approx(b.lambda_min, abs=1e-8)


def test_iterative_band_reports_nonconvergence(grid):
    p = ResolventProblem(grid, 2.0, Box([0.5, 0.5], [2.5, 4.0]), lambdas=[0.0, 9.0])
    with pytest.raises(ConvergenceError, match="lambda=0"):
        uniform_lower_bound(p, tol=1e-14, method="iterative", max_iter=3, K0=1e6)


def test_full_space_c_star_is_one_plus_the_symbol_gap(grid):
    # chi = 1 makes H diagonal and at least the identity
    lams = lambda_grid(20.0, 2.0)
    base = ResolventProblem(grid, 2.0, Full())
    res = uniform_lower_bound(ResolventProblem(grid, 2.0, Full(), lambdas=lams))
    gap = min(float(base.diagonal(x).min()) for x in lams)
    assert res.c_star == pytest.approx(1.0 + gap, abs=1e-12)
    on_symbols = uniform_lower_bound(ResolventProblem(grid, 2.0, Full(), lambdas=[1.0, 2.0, 5.0]))
    assert on_symbols.c_star == pytest.approx(1.0, abs=1e-12)


def test_c_star_grows_with_delta(grid):
    lams = lambda_grid(15.0, 2.0)
    vals = []
    for delta in (0.05, 0.2, 0.5):
        p = ResolventProblem(grid, 2.0, grid_pattern(L / 4, 0.3), delta, lams)
        vals.append(uniform_lower_bound(p).c_star_upper)
    assert vals[0] <= vals[1] * (1 + 1e-9) <= vals[2] * (1 + 2e-9)


def test_lambda_grid_spacing():
    for s in (0.5, 1.0, 2.0):
        lam = lambda_grid(40.0, s)
        assert lam[0] == 0 and lam[-1] == 40.0
        check_lambda_grid(lam, s, 40.0)
    with pytest.raises(ValueError):
        lambda_grid(10.0, 2.0, factor=0.9)


@pytest.mark.parametrize(
    "lams, msg",
    [([0.0, 0.4, 2.0], "spacing"), ([0.0, 0.5, 0.4], "increasing"), ([1.0, 1.2], "cover"), ([], "non-empty")],
)
def test_lambda_grid_errors_name_the_key(lams, msg):
    with pytest.raises(ConfigError, match=msg) as info:
        check_lambda_grid(lams, 2.0, 1.0)
    assert info.value.path == "lambdas"


def test_lambda_above_the_lattice_symbols(grid):
    p = ResolventProblem(grid, 2.0, Full(), lambdas=[1e4])
    with pytest.raises(NyquistError):
        uniform_lower_bound(p)


def test_result_csv_and_summary(grid):
    p = ResolventProblem(grid, 2.0, grid_pattern(L / 4, 0.4), 0.1, lambda_grid(6.0, 2.0))
    res = uniform_lower_bound(p)
    lines = res.to_csv().splitlines()
    assert lines[0] == "lambda,lambda_min,lower,iterations,residual,band,method"
    assert len(lines) == len(p.lambdas) + 1
    doc = res.summary()
    assert doc["c_star"] == res.c_star <= res.c_star_upper
    assert doc["constant"] == pytest.approx(1 / res.c_star)
    assert doc["argmin_lambda"] in p.lambdas


def test_operator_matches_matvec_on_a_small_grid():
    g = TorusGrid(1, L, 8)
    p = ResolventProblem(g, 1.0, Box([0.3], [2.0]))
    H = _full_dense(p, 1.7)
    cols = np.stack(
        [forward_transform(resolvent_matvec(p, 1.7, g.plane_wave((m,))), g).ravel() for m in g.axis_modes], 1
    )
    np.testing.assert_allclose(cols, H, atol=1e-12)

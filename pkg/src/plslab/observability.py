"""Observability constants as extremal eigenvalues of concentration operators.

For a frequency mask ``M`` and an observation set ``Omega = U_delta(E)`` the
concentration operator is ``A = P_M chi_Omega P_M`` restricted to fields with
spectrum in ``M``.  Its smallest eigenvalue ``lambda_min`` is the best
constant in ``||f||_Omega^2 >= lambda_min ||f||^2`` for band-limited ``f``,
so the observability constant is ``C = lambda_min ** -0.5``.

Two solvers are provided: a dense Hermitian eigensolve of the Gram matrix
(one FFT of the indicator gives every entry) and a matrix-free Lanczos
iteration on the complement operator ``B = I - A``, whose largest eigenvalue
is ``1 - lambda_min``.
"""
from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import asdict, dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft
import scipy.linalg

from .errors import CapacityError, ConvergenceError, ShapeError
from .geometry import Dilate, SetSpec, estimate_gcc, grid_indicator
from .lattice import TorusGrid, fft_workers
from .spectra import Annulus, Ball, ManifoldShell, region_mask

__all__ = [
    "ConcentrationProblem",
    "EigResult",
    "SweepRow",
    "concentration_matvec",
    "complement_matvec",
    "dense_gram",
    "lanczos_largest",
    "LanczosResult",
    "gram_blocks",
    "translation_periods",
    "residue_key",
    "smallest_eigenvalue",
    "pls_constant",
    "radius_sweep",
    "sweep_csv",
    "theoretical_bound",
    "log_theoretical_bound",
    "LAMBDA_FLOOR",
    "DENSE_CAP",
]

LAMBDA_FLOOR = 1e-14
DENSE_CAP = 4096


@dataclass
class ConcentrationProblem:
    """Band mask plus observation set ``U_delta(E)`` on a grid.

    ``Omega`` is sampled at the grid nodes (``quadrature = "nodes"``), i.e.
    ``||f||_Omega^2`` is the sum of ``|f|^2`` over nodes inside ``Omega``.
    """

    grid: TorusGrid
    mask: np.ndarray
    E: SetSpec
    delta: float = 0.0
    quadrature: str = "nodes"

    def __post_init__(self):
        self.mask = np.asarray(self.grid.check(self.mask, "mask"), dtype=bool)
        if not self.mask.any():
            raise ShapeError("concentration problem needs a non-empty mask")
        if self.quadrature != "nodes":
            raise ValueError(f"unknown quadrature mode {self.quadrature!r}")

    @property
    def omega(self) -> SetSpec:
        return Dilate(self.E, self.delta) if self.delta > 0 else self.E

    @cached_property
    def chi(self) -> np.ndarray:
        return grid_indicator(self.omega, self.grid).astype(float)

    @property
    def size(self) -> int:
        return int(self.mask.sum())

    @property
    def fraction(self) -> float:
        """``|Omega| / |T|`` under the node quadrature."""
        return float(self.chi.mean())

    @cached_property
    def modes(self) -> np.ndarray:
        """Integer frequency vectors of the mask, in mask (C) order."""
        return self.grid.modes[self.mask]


def _embed(problem, c):
    full = np.zeros(problem.grid.shape, dtype=complex)
    full[problem.mask] = c
    return full


def concentration_matvec(problem: ConcentrationProblem, c: np.ndarray) -> np.ndarray:
    """``c -> restrict_M(DFT(chi_Omega * IDFT(extend(c))))``."""
    c = np.asarray(c)
    if c.shape != (problem.size,):
        raise ShapeError(f"coefficient vector has shape {c.shape}, mask holds {problem.size}")
    w = fft_workers()
    u = scipy.fft.ifftn(_embed(problem, c), norm="ortho", workers=w)
    u *= problem.chi
    return scipy.fft.fftn(u, norm="ortho", workers=w)[problem.mask]


def complement_matvec(problem: ConcentrationProblem, c: np.ndarray) -> np.ndarray:
    """``(I - A) c``: concentration on the complement of ``Omega``."""
    return np.asarray(c) - concentration_matvec(problem, c)


def dense_gram(problem: ConcentrationProblem, cap: int = DENSE_CAP) -> np.ndarray:
    """Gram matrix ``G[a, b] = <chi e_b, e_a>`` over the mask.

    ``G[a, b] = chi_hat[(m_a - m_b) mod N] / N^d`` with the unnormalized DFT
    of the node indicator, so it depends only on frequency differences.
    """
    n = problem.size
    if n > cap:
        raise CapacityError(f"mask holds {n} frequencies, above the dense cap {cap}; use the iterative path")
    grid = problem.grid
    chi_hat = scipy.fft.fftn(problem.chi, workers=fft_workers()) / grid.size
    flat = chi_hat.ravel()
    modes = problem.modes
    idx = np.zeros((n, n), dtype=np.int64)
    for axis in range(grid.d):
        diff = np.mod(modes[:, None, axis] - modes[None, :, axis], grid.N)
        idx = idx * grid.N + diff
    return flat[idx]


def translation_periods(chi: np.ndarray, grid: TorusGrid) -> tuple[int, ...]:
    """Per-axis ``q`` such that ``chi`` is invariant under shifts by ``N/q`` nodes.

    The DFT of such an indicator is supported on ``m_i = 0 mod q_i``, so the
    Gram matrix couples only frequencies in the same residue class mod ``q``.
    """
    qs = []
    for axis in range(grid.d):
        q = 1
        for cand in (2**j for j in range(1, int(math.log2(grid.N)) + 1)):
            if np.array_equal(np.roll(chi, grid.N // cand, axis=axis), chi):
                q = cand
            else:
                break
        qs.append(q)
    return tuple(qs)


def residue_key(chi: np.ndarray, grid: TorusGrid) -> np.ndarray | None:
    """Integer label of every frequency's residue class mod :func:`translation_periods`.

    Multiplication by ``chi`` couples only frequencies with equal labels.
    Returns ``None`` when ``chi`` has no shift symmetry.
    """
    q = np.array(translation_periods(chi, grid))
    if np.all(q == 1):
        return None
    residues = np.mod(grid.modes, q)
    key = np.zeros(grid.shape, dtype=np.int64)
    for axis in range(grid.d):
        key = key * q[axis] + residues[..., axis]
    return key


def gram_blocks(problem: ConcentrationProblem) -> list[np.ndarray]:
    """Boolean sub-masks on which the Gram matrix is block diagonal (exactly)."""
    key = residue_key(problem.chi, problem.grid)
    if key is None:
        return [problem.mask]
    return [problem.mask & (key == val) for val in np.unique(key[problem.mask])]


def _subproblem(problem, sub_mask):
    sub = ConcentrationProblem(problem.grid, sub_mask, problem.E, problem.delta, problem.quadrature)
    sub.__dict__["chi"] = problem.chi
    return sub


@dataclass
class EigResult:
    """Smallest eigenvalue of a concentration operator and how it was found.

    ``floor_hit`` marks an iterative run stopped because a Ritz value proved
    ``lambda_min <= LAMBDA_FLOOR``; ``lambda_min`` is then that upper bound
    and the residual contract does not apply.
    """

    lambda_min: float
    residual: float
    iterations: int
    method: str
    tol: float
    vector: np.ndarray | None = field(default=None, repr=False)
    blocks: int = 1
    floor_hit: bool = False

    @property
    def lambda_max_complement(self) -> float:
        return 1.0 - self.lambda_min


@dataclass
class LanczosResult:
    theta: float
    vector: np.ndarray
    residual: float
    iterations: int
    converged: bool


def lanczos_largest(
    matvec, n, *, tol=1e-10, max_iter=500, seed=0, norm_bound=None, check_every=5, stop_above=None
) -> LanczosResult:
    """Largest eigenpair of a Hermitian operator by Lanczos.

    Full reorthogonalization (two classical Gram-Schmidt passes) against all
    previous Lanczos vectors; seeded complex Gaussian start vector.
    Convergence is declared when the explicitly recomputed residual
    ``||A y - theta y||`` is at most ``tol * ||A||``, where ``||A||`` is
    ``norm_bound`` if given, otherwise the largest Ritz value magnitude.

    Ritz values never exceed the true largest eigenvalue, so once one passes
    ``stop_above`` the iteration returns early with ``converged=False``.
    Raises :class:`ConvergenceError` after ``max_iter`` steps otherwise.
    """
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v /= np.linalg.norm(v)
    kmax = min(max_iter, n)
    V = np.empty((kmax + 1, n), dtype=complex)
    V[0] = v
    alphas, betas = [], []
    theta, resid = None, np.inf

    def ritz(j):
        if j == 1:
            return np.array([alphas[0]]), np.ones((1, 1))
        a, b = np.array(alphas), np.array(betas[: j - 1])
        try:
            return scipy.linalg.eigh_tridiagonal(a, b)
        except np.linalg.LinAlgError:
            # stemr occasionally fails on clustered spectra; the dense solver does not
            return scipy.linalg.eigh(np.diag(a) + np.diag(b, 1) + np.diag(b, -1))

    def ritz_vector(coeffs):
        y = V[: len(coeffs)].T @ coeffs
        return y / np.linalg.norm(y)

    for j in range(kmax):
        w = matvec(V[j])
        alpha = float(np.vdot(V[j], w).real)
        alphas.append(alpha)
        basis = V[: j + 1]
        for _ in range(2):
            w = w - basis.T @ (basis.conj() @ w)
        beta = float(np.linalg.norm(w))
        betas.append(beta)
        evals, evecs = ritz(j + 1)
        theta = float(evals[-1])
        anorm = norm_bound if norm_bound is not None else max(np.max(np.abs(evals)), np.finfo(float).tiny)
        if stop_above is not None and theta >= stop_above:
            y = ritz_vector(evecs[:, -1])
            resid = float(np.linalg.norm(matvec(y) - theta * y))
            return LanczosResult(theta, y, resid, j + 1, False)
        breakdown = beta <= 1e-13 * max(anorm, 1.0)
        estimate = beta * abs(evecs[-1, -1])
        if breakdown or estimate <= tol * anorm or j + 1 == kmax:
            y = ritz_vector(evecs[:, -1])
            resid = float(np.linalg.norm(matvec(y) - theta * y))
            if resid <= tol * anorm:
                return LanczosResult(theta, y, resid, j + 1, True)
            if breakdown:
                break
        V[j + 1] = w / beta
    raise ConvergenceError(
        f"Lanczos did not reach residual {tol:g}*||A|| in {len(alphas)} steps",
        estimate=theta,
        residual=resid,
        iterations=len(alphas),
    )


def _solve_block(problem, tol, max_iter, seed, method, keep_vector):
    if method == "dense":
        G = dense_gram(problem, cap=problem.size)
        vals, vecs = scipy.linalg.eigh(G, subset_by_index=[0, 0])
        lam, vec = float(vals[0]), vecs[:, 0]
        resid = float(np.linalg.norm(G @ vec - lam * vec))
        return EigResult(lam, resid, 1, "dense", tol, vec if keep_vector else None)
    res = lanczos_largest(
        lambda c: complement_matvec(problem, c),
        problem.size,
        tol=tol,
        max_iter=max_iter,
        seed=seed,
        norm_bound=1.0,
        stop_above=1.0 - LAMBDA_FLOOR,
    )
    return EigResult(
        1.0 - res.theta,
        res.residual,
        res.iterations,
        "iterative",
        tol,
        res.vector if keep_vector else None,
        floor_hit=not res.converged,
    )


def smallest_eigenvalue(
    problem: ConcentrationProblem,
    tol: float = 1e-10,
    max_iter: int = 500,
    seed: int = 0,
    method: str = "auto",
    dense_cap: int = DENSE_CAP,
    keep_vector: bool = False,
    use_symmetry: bool = True,
) -> EigResult:
    """``lambda_min`` of the concentration operator.

    ``method`` is ``"dense"``, ``"iterative"`` or ``"auto"`` (dense when a
    block holds at most ``dense_cap`` frequencies).  The iterative path runs
    Lanczos on ``B = I - A`` (norm at most 1) and returns ``1 - lambda_max(B)``.

    With ``use_symmetry`` the mask is first split into the exact diagonal
    blocks of :func:`gram_blocks` (present when ``Omega`` is invariant under
    a sub-lattice of grid shifts) and every block is solved separately.
    ``keep_vector`` returns the eigenvector on the winning block's
    coefficients, so it is only meaningful with a single block.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if method not in ("auto", "dense", "iterative"):
        raise ValueError(f"unknown method {method!r}")
    blocks = gram_blocks(problem) if use_symmetry else [problem.mask]
    best, total_its = None, 0
    for i, sub_mask in enumerate(blocks):
        sub = problem if len(blocks) == 1 else _subproblem(problem, sub_mask)
        m = method
        if m == "auto":
            m = "dense" if sub.size <= dense_cap else "iterative"
        try:
            res = _solve_block(sub, tol, max_iter, seed + i, m, keep_vector)
        except ConvergenceError as err:
            err.estimate = None if err.estimate is None else 1.0 - err.estimate
            raise
        total_its += res.iterations
        if best is None or res.lambda_min < best.lambda_min:
            best = res
    best.iterations = total_its
    best.blocks = len(blocks)
    return best


def pls_constant(lambda_min, floor: float = LAMBDA_FLOOR) -> float:
    """``C = lambda_min ** -0.5``, or ``inf`` when ``lambda_min <= floor``."""
    if isinstance(lambda_min, EigResult):
        lambda_min = lambda_min.lambda_min
    if lambda_min <= floor:
        return math.inf
    return float(lambda_min) ** -0.5


# ----------------------------------------------------------- bound curves


def log_theoretical_bound(
    gamma: float,
    ell: float,
    beta: float,
    delta: float | None = None,
    d: int = 2,
    k: int = 1,
    form: str = "neighborhood",
    C0: float = 10.0,
    C1: float = 10.0,
    C2: float = 10.0,
) -> float:
    """Natural log of the closed-form observability envelope.

    ``form`` selects
      * ``"strip"``: ``(C0/gamma)^(C0 beta ell)`` (flat spectrum near a plane),
      * ``"prop"``: ``(C2/gamma)^(C2 beta ell)`` (axis strip spectrum),
      * ``"neighborhood"``: ``C1 (ell/delta)^(d+1) (C0/gamma)^(C0 ell beta)``
        (observation on a delta-neighbourhood, curved spectra).
    The constants are unknown in theory; these are envelopes, never fits.
    """
    if not 0 < gamma < 1:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    if min(ell, beta) <= 0:
        raise ValueError("ell and beta must be positive")
    if form == "strip":
        return C0 * beta * ell * math.log(C0 / gamma)
    if form == "prop":
        return C2 * beta * ell * math.log(C2 / gamma)
    if form == "neighborhood":
        if delta is None or delta <= 0:
            raise ValueError("the neighbourhood form needs delta > 0")
        return math.log(C1) + (d + 1) * math.log(ell / delta) + C0 * ell * beta * math.log(C0 / gamma)
    raise ValueError(f"unknown bound form {form!r}")


def theoretical_bound(*args, **kwargs) -> float:
    """:func:`log_theoretical_bound` exponentiated (``inf`` on overflow)."""
    val = log_theoretical_bound(*args, **kwargs)
    try:
        return math.exp(val)
    except OverflowError:
        return math.inf


# ---------------------------------------------------------------- sweeps


@dataclass
class SweepRow:
    R: float
    beta: float
    delta: float
    lambda_min: float
    C: float
    mask_size: int
    method: str
    residual: float
    seconds: float
    log_bound: float = math.nan


SWEEP_COLUMNS = ["R", "beta", "delta", "lambda_min", "C", "mask_size", "method", "residual", "seconds", "log_bound"]


def _family_region(family, R, beta, sigma):
    if family == "annulus":
        return Annulus(R, beta)
    if family == "ball":
        return Ball(R)
    if family == "shell":
        if sigma is None:
            raise ValueError("shell family needs a manifold sigma")
        return ManifoldShell(sigma, R, beta)
    raise ValueError(f"unknown region family {family!r}")


def radius_sweep(
    E: SetSpec,
    delta: float,
    family: str,
    R_list,
    grid: TorusGrid,
    beta: float | None = None,
    sigma=None,
    tol: float = 1e-10,
    max_iter: int = 500,
    seed: int = 0,
    dense_cap: int = DENSE_CAP,
    gcc: tuple[float, float] | None = None,
    bound_constants: dict | None = None,
) -> list[SweepRow]:
    """Observability constant ``C(R)`` for a family of spectral regions.

    ``family`` is ``"annulus"``, ``"ball"`` or ``"shell"``; radii are in
    physical frequency units.  ``gcc = (ell, gamma)`` enables the bound
    column: the neighbourhood envelope for annuli and shells, and the
    strip envelope with width ``R`` for balls (the constant then grows with
    ``R``).
    """
    if family != "ball" and beta is None:
        raise ValueError(f"{family} family needs a width beta")
    consts = bound_constants or {}
    rows = []
    for R in R_list:
        region = _family_region(family, float(R), beta, sigma)
        mask = region_mask(region, grid)
        problem = ConcentrationProblem(grid, mask, E, delta)
        t0 = time.perf_counter()
        eig = smallest_eigenvalue(problem, tol=tol, max_iter=max_iter, seed=seed, dense_cap=dense_cap)
        seconds = time.perf_counter() - t0
        log_bound = math.nan
        if gcc is not None:
            ell, gamma = gcc
            if family == "ball":
                log_bound = log_theoretical_bound(gamma, ell, float(R), d=grid.d, k=grid.d, form="strip", **consts)
            elif delta > 0:
                # the neighbourhood envelope is undefined at delta = 0; leave nan
                log_bound = log_theoretical_bound(gamma, ell, beta, delta, d=grid.d, k=1, **consts)
        rows.append(
            SweepRow(
                R=float(R),
                beta=float(beta) if beta is not None else math.nan,
                delta=float(delta),
                lambda_min=eig.lambda_min,
                C=pls_constant(eig.lambda_min),
                mask_size=problem.size,
                method=eig.method,
                residual=eig.residual,
                seconds=seconds,
                log_bound=log_bound,
            )
        )
    return rows


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def sweep_csv(rows: list[SweepRow], timing: bool = True) -> str:
    """CSV text for sweep rows; ``timing=False`` drops the seconds column."""
    cols = [c for c in SWEEP_COLUMNS if timing or c != "seconds"]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    for r in rows:
        doc = asdict(r)
        writer.writerow([_fmt(doc[c]) for c in cols])
    return buf.getvalue()

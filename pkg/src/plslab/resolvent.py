"""Uniform-in-lambda lower bounds for the fractional resolvent form.

For ``lambda >= 0`` the Hermitian operator

    H_lambda = c(lambda) (Lambda_s - lambda)^2 + chi_Omega,
    c(lambda) = (1 + lambda)^(2/s - 2),

with ``Lambda_s`` the multiplier ``(|xi|^2+1)^(s/2)`` and ``Omega = U_delta(E)``,
is positive semidefinite.  The smallest eigenvalue minimized over a lambda
grid, ``c_star``, is the best constant in the two-term inequality
``c(lambda)||(Lambda_s - lambda) f||^2 + ||f||_Omega^2 >= c_star ||f||^2``.

Far from the critical shell ``sigma_m ~ lambda`` the diagonal term dominates,
so each eigenproblem is solved on the band ``B_K = {m : c (sigma_m - lambda)^2 <= K}``.
Writing ``mu_B`` for the smallest eigenvalue of the compression to ``B_K``,

    mu_B - 1 / (4 (K - mu_B))  <=  lambda_min(H_lambda)  <=  mu_B,

because the diagonal exceeds ``K`` off the band and the off-diagonal block of
a multiplication by an indicator has norm at most 1/2.  ``K`` is enlarged
until the two sides agree to ``band_rtol``.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft
import scipy.linalg

from .errors import ConfigError, ConvergenceError, NyquistError
from .geometry import Dilate, SetSpec, grid_indicator
from .lattice import FractionalSymbol, TorusGrid, fft_workers, forward_transform, inverse_transform
from .observability import DENSE_CAP, ConcentrationProblem, dense_gram, lanczos_largest, residue_key

__all__ = [
    "ResolventProblem",
    "ResolventResult",
    "resolvent_weight",
    "resolvent_matvec",
    "lambda_grid",
    "check_lambda_grid",
    "band_lambda_min",
    "uniform_lower_bound",
]


def resolvent_weight(lam, s: float):
    """``c(lambda) = (1 + lambda)^(2/s - 2)``; identically 1 for ``s = 2``."""
    return (1.0 + np.asarray(lam, dtype=float)) ** (2.0 / s - 2.0)


def lambda_grid(lambda_max: float, s: float, factor: float = 0.5, start: float = 0.0) -> np.ndarray:
    """Points from ``start`` to ``lambda_max`` with steps ``factor (1+lambda)^(1-1/s)``."""
    if not 0 < factor <= 0.5:
        raise ValueError("spacing factor must lie in (0, 0.5]")
    pts = [float(start)]
    while pts[-1] < lambda_max:
        nxt = pts[-1] + factor * (1.0 + pts[-1]) ** (1.0 - 1.0 / s)
        pts.append(min(nxt, float(lambda_max)))
    return np.array(pts)


def check_lambda_grid(lambdas, s: float, lambda_max: float | None = None) -> np.ndarray:
    """Validate coverage of ``[0, lambda_max]`` and the resonance spacing.

    Consecutive points may be at most ``0.5 (1 + lambda)^(1 - 1/s)`` apart,
    measured from the left point.  Raises :class:`ConfigError`.
    """
    lam = np.asarray(lambdas, dtype=float)
    if lam.ndim != 1 or lam.size == 0:
        raise ConfigError("lambda grid must be a non-empty list", "lambdas")
    if np.any(np.diff(lam) <= 0) or lam[0] < 0:
        raise ConfigError("lambda grid must be strictly increasing and non-negative", "lambdas")
    if lambda_max is not None and (lam[0] > 0 or lam[-1] < lambda_max):
        raise ConfigError(f"lambda grid does not cover [0, {lambda_max}]", "lambdas")
    allowed = 0.5 * (1.0 + lam[:-1]) ** (1.0 - 1.0 / s)
    bad = np.flatnonzero(np.diff(lam) > allowed * (1 + 1e-12))
    if bad.size:
        i = int(bad[0])
        raise ConfigError(
            f"spacing {lam[i + 1] - lam[i]:.4g} after lambda={lam[i]:.4g} exceeds {allowed[i]:.4g}",
            "lambdas",
        )
    return lam


@dataclass
class ResolventProblem:
    grid: TorusGrid
    s: float
    E: SetSpec
    delta: float = 0.0
    lambdas: np.ndarray = field(default_factory=lambda: np.zeros(1))

    def __post_init__(self):
        if not 0 < self.s <= 2:
            raise ValueError(f"fractional order must lie in (0, 2], got {self.s}")
        self.lambdas = np.atleast_1d(np.asarray(self.lambdas, dtype=float))
        if np.any(self.lambdas < 0):
            raise ValueError("lambda must be non-negative")

    @cached_property
    def sigma(self) -> np.ndarray:
        return FractionalSymbol(self.grid, self.s).values

    @cached_property
    def chi(self) -> np.ndarray:
        omega = Dilate(self.E, self.delta) if self.delta > 0 else self.E
        return grid_indicator(omega, self.grid).astype(float)

    @cached_property
    def residue_key(self):
        return residue_key(self.chi, self.grid)

    def weight(self, lam) -> float:
        return float(resolvent_weight(lam, self.s))

    def diagonal(self, lam) -> np.ndarray:
        return self.weight(lam) * (self.sigma - lam) ** 2


def resolvent_matvec(problem: ResolventProblem, lam: float, u: np.ndarray) -> np.ndarray:
    """``H_lambda u`` for a spatial field ``u``."""
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    grid = problem.grid
    uhat = forward_transform(u, grid)
    return inverse_transform(problem.diagonal(lam) * uhat, grid) + problem.chi * grid.check(u)


@dataclass
class BandSolve:
    lam: float
    lambda_min: float
    lower: float
    K: float
    band: int
    iterations: int
    residual: float
    method: str


def _band_eig(problem, lam, band, diag_band, method, tol, max_iter, seed):
    """Smallest eigenvalue of ``H_lambda`` compressed to ``band``."""
    sub = ConcentrationProblem(problem.grid, band, problem.E, problem.delta)
    sub.__dict__["chi"] = problem.chi  # share the sampled indicator
    n = sub.size
    if method == "dense":
        H = dense_gram(sub, cap=n)
        H[np.diag_indices(n)] += diag_band
        vals, vecs = scipy.linalg.eigh(H, subset_by_index=[0, 0])
        vec = vecs[:, 0]
        return float(vals[0]), 1, float(np.linalg.norm(H @ vec - vals[0] * vec))
    # Lanczos on sigma_bound - H_B, whose top eigenvalue is sigma_bound - mu_B
    bound = float(diag_band.max()) + 1.0
    w = fft_workers()

    def matvec(c):
        full = np.zeros(problem.grid.shape, dtype=complex)
        full[band] = c
        x = scipy.fft.ifftn(full, norm="ortho", workers=w)
        x *= problem.chi
        return bound * c - (scipy.fft.fftn(x, norm="ortho", workers=w)[band] + diag_band * c)

    res = lanczos_largest(matvec, n, tol=tol, max_iter=max_iter, seed=seed, norm_bound=bound)
    return bound - res.theta, res.iterations, res.residual


def band_lambda_min(
    problem: ResolventProblem,
    lam: float,
    *,
    K0: float = 16.0,
    band_rtol: float = 1e-2,
    tol: float = 1e-10,
    max_iter: int = 500,
    seed: int = 0,
    method: str = "auto",
    dense_cap: int = DENSE_CAP,
    use_symmetry: bool = True,
) -> BandSolve:
    """Certified enclosure of ``lambda_min(H_lambda)`` from a band compression.

    The band threshold starts at ``K0``.  When the enclosure is wider than
    ``band_rtol * mu_B`` it is raised to the value that would close it at the
    current ``mu_B`` (at least doubling), until the band is the whole lattice.
    With ``use_symmetry`` the band is split into the exact residue blocks of
    :func:`~plslab.observability.residue_key` and each block is solved alone.
    """
    diag = problem.diagonal(lam)
    chi = problem.chi
    if np.all(chi == chi.flat[0]):
        # multiplication by a constant: H is diagonal
        v = float(diag.min() + chi.flat[0])
        return BandSolve(lam, v, v, math.inf, 1, 0, 0.0, "diagonal")
    key = problem.residue_key if use_symmetry else None
    K = float(K0)
    while True:
        band = diag <= K
        if not band.any():
            K *= 2
            continue
        whole = bool(band.all())
        blocks = [band] if key is None else [band & (key == v) for v in np.unique(key[band])]
        mu, its, resid, used = math.inf, 0, 0.0, "dense"
        for i, blk in enumerate(blocks):
            m = method
            if m == "auto":
                m = "dense" if blk.sum() <= dense_cap else "iterative"
            mu_b, it_b, r_b = _band_eig(problem, lam, blk, diag[blk], m, tol, max_iter, seed + i)
            its += it_b
            if mu_b < mu:
                mu, resid, used = mu_b, r_b, m
        lower = mu if whole else mu - 1.0 / (4.0 * (K - mu))
        if whole or mu - lower <= band_rtol * max(mu, 0.0):
            return BandSolve(lam, mu, lower, K, int(band.sum()), its, resid, used)
        target = mu + 1.0 / (4.0 * band_rtol * mu) if mu > 0 else math.inf
        K = max(2 * K, 1.05 * target) if math.isfinite(target) else float(diag.max())


@dataclass
class ResolventResult:
    """Per-lambda enclosures and the uniform constant ``c_star``.

    ``c_star`` is the smallest certified lower bound over the grid;
    ``c_star_upper`` the smallest band eigenvalue, which it trails by at
    most the band tolerance.
    """

    rows: list[BandSolve]
    s: float
    c_star: float
    c_star_upper: float
    argmin: float
    measure: float

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([r.lam for r in self.rows])

    @property
    def lambda_min(self) -> np.ndarray:
        return np.array([r.lambda_min for r in self.rows])

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["lambda", "lambda_min", "lower", "iterations", "residual", "band", "method"])
        for r in self.rows:
            wr.writerow([repr(r.lam), repr(r.lambda_min), repr(r.lower), r.iterations, repr(r.residual), r.band, r.method])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "s": self.s,
            "c_star": self.c_star,
            "c_star_upper": self.c_star_upper,
            "argmin_lambda": self.argmin,
            "constant": 1.0 / self.c_star if self.c_star > 0 else math.inf,
            "measure": self.measure,
            "points": len(self.rows),
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True)


def uniform_lower_bound(problem: ResolventProblem, tol: float = 1e-10, seed: int = 0, **kw) -> ResolventResult:
    """Sweep the lambda grid of ``problem`` with :func:`band_lambda_min`.

    Raises :class:`ConvergenceError` naming the first lambda whose solve
    failed.  Keyword arguments go to :func:`band_lambda_min`.
    """
    top = float(problem.sigma.max())
    if problem.lambdas.max() > top:
        raise NyquistError(f"lambda {problem.lambdas.max():g} above the largest lattice symbol {top:g}")
    rows = []
    for i, lam in enumerate(problem.lambdas):
        try:
            rows.append(band_lambda_min(problem, float(lam), tol=tol, seed=seed + i, **kw))
        except ConvergenceError as err:
            raise ConvergenceError(
                f"no convergence at lambda={lam:g}: {err}", err.estimate, err.residual, err.iterations
            ) from err
    lowers = np.array([r.lower for r in rows])
    i = int(np.argmin(lowers))
    return ResolventResult(
        rows,
        problem.s,
        float(lowers[i]),
        float(min(r.lambda_min for r in rows)),
        float(rows[i].lam),
        float(problem.chi.mean()),
    )

"""Frequency-space regions and their masks on the lattice.

All regions are described in physical frequency units.  A region is turned
into a boolean array over the lattice of a :class:`~plslab.lattice.TorusGrid`
(FFT ordering) by :func:`region_mask`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.spatial import cKDTree

from .errors import EmptyRegionError, NyquistError
from .geometry import flatness
from .lattice import TorusGrid

__all__ = [
    "Annulus",
    "Ball",
    "Strip",
    "ManifoldShell",
    "Circle",
    "Ellipse",
    "ClosedSpline",
    "Sphere",
    "region_mask",
    "mask_points",
    "mask_flatness",
    "region_from_dict",
    "manifold_from_dict",
    "SHELL_SLACK",
]

# boundary points count as members up to this relative rounding slack
_EDGE = 1e-12
# sampled shell distances are accurate to SHELL_SLACK * beta
SHELL_SLACK = 0.01


# ------------------------------------------------------------- manifolds


class Manifold:
    """Compact curve (d=2) or surface (d=3) with a parametrization.

    ``point(t)`` maps parameters of shape ``(n, p)`` to points ``(n, d)``;
    parameters are periodic with the periods in ``periods`` (``None`` for a
    bounded coordinate).  ``extent`` is the largest distance from the origin
    and ``curvature`` an upper bound on curvature, both at unit scale.
    """

    kind = "manifold"
    dim = 2
    periods: tuple = ()

    def point(self, t):
        raise NotImplementedError

    def exact_distance(self, x):
        return None

    def to_dict(self):
        return {"type": self.kind, **self.params()}

    def params(self):
        return {}

    def __eq__(self, other):
        return type(self) is type(other) and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(repr(self.to_dict()))


class Circle(Manifold):
    kind = "circle"
    dim = 2
    periods = (2 * math.pi,)

    def __init__(self, radius=1.0):
        self.radius = float(radius)
        self.extent = self.radius
        self.curvature = 1.0 / self.radius

    def params(self):
        return {"radius": self.radius}

    def point(self, t):
        t = t[:, 0]
        return self.radius * np.column_stack([np.cos(t), np.sin(t)])

    def exact_distance(self, x):
        return np.abs(np.linalg.norm(x, axis=-1) - self.radius)


class Ellipse(Manifold):
    kind = "ellipse"
    dim = 2
    periods = (2 * math.pi,)

    def __init__(self, a=1.0, b=0.5):
        self.a, self.b = float(a), float(b)
        self.extent = max(self.a, self.b)
        self.curvature = max(self.a, self.b) / min(self.a, self.b) ** 2

    def params(self):
        return {"a": self.a, "b": self.b}

    def point(self, t):
        t = t[:, 0]
        return np.column_stack([self.a * np.cos(t), self.b * np.sin(t)])


class ClosedSpline(Manifold):
    """Periodic cubic spline through control points (first point not repeated)."""

    kind = "spline"
    dim = 2
    periods = (1.0,)

    def __init__(self, points):
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
            raise ValueError("closed spline needs at least three planar control points")
        self.control = pts
        closed = np.vstack([pts, pts[:1]])
        seg = np.linalg.norm(np.diff(closed, axis=0), axis=1)
        u = np.concatenate([[0.0], np.cumsum(seg)]) / seg.sum()
        self._spline = CubicSpline(u, closed, bc_type="periodic")
        fine = np.linspace(0, 1, 4001)
        d1, d2 = self._spline(fine, 1), self._spline(fine, 2)
        speed = np.linalg.norm(d1, axis=1)
        kappa = np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]) / speed**3
        self.extent = float(np.max(np.linalg.norm(self._spline(fine), axis=1)))
        self.curvature = float(np.max(kappa))
        self._length = float(np.sum(np.linalg.norm(np.diff(self._spline(fine), axis=0), axis=1)))

    def params(self):
        return {"points": self.control.tolist()}

    def point(self, t):
        return self._spline(np.mod(t[:, 0], 1.0))


class Sphere(Manifold):
    kind = "sphere"
    dim = 3
    periods = (None, 2 * math.pi)

    def __init__(self, radius=1.0):
        self.radius = float(radius)
        self.extent = self.radius
        self.curvature = 1.0 / self.radius

    def params(self):
        return {"radius": self.radius}

    def point(self, t):
        th, ph = t[:, 0], t[:, 1]
        return self.radius * np.column_stack(
            [np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)]
        )

    def exact_distance(self, x):
        return np.abs(np.linalg.norm(x, axis=-1) - self.radius)


_MANIFOLDS = {c.kind: c for c in (Circle, Ellipse, ClosedSpline, Sphere)}


def _param_samples(m: Manifold, scale: float, spacing: float):
    """Parameter grid whose image under ``scale * m`` has roughly ``spacing`` gaps."""
    if m.dim == 2:
        if isinstance(m, ClosedSpline):
            n = int(math.ceil(scale * m._length / spacing)) + 8
            return (np.arange(n) / n)[:, None], (1.0 / n,)
        n = int(math.ceil(2 * math.pi * scale * m.extent / spacing)) + 8
        return (2 * math.pi * np.arange(n) / n)[:, None], (2 * math.pi / n,)
    n_th = int(math.ceil(math.pi * scale * m.extent / spacing)) + 4
    th = (np.arange(n_th) + 0.5) * math.pi / n_th
    rows = []
    for t in th:
        n_ph = max(4, int(math.ceil(2 * math.pi * scale * m.extent * math.sin(t) / spacing)))
        ph = 2 * math.pi * np.arange(n_ph) / n_ph
        rows.append(np.column_stack([np.full(n_ph, t), ph]))
    return np.vstack(rows), (math.pi / n_th, 2 * math.pi / 4)


def _foot_refine(m: Manifold, scale: float, x, t, iters=30):
    """Polish nearest-sample parameters by Gauss-Newton on the squared distance."""
    h = 1e-6
    p = t.shape[1]
    for _ in range(iters):
        base = scale * m.point(t)
        r = base - x
        jac = []
        for j in range(p):
            tp = t.copy()
            tp[:, j] += h
            jac.append((scale * m.point(tp) - base) / h)
        jac = np.stack(jac, axis=-1)  # (n, d, p)
        jtj = np.einsum("ndi,ndj->nij", jac, jac) + 1e-14 * np.eye(p)
        g = np.einsum("ndi,nd->ni", jac, r)
        step = np.linalg.solve(jtj, g[..., None])[..., 0]
        t = t - step
        if np.max(np.abs(step)) < 1e-13:
            break
    return t


def manifold_distance(m: Manifold, scale: float, x, tol: float, exact: bool = False):
    """Distance from points ``x`` to ``scale * m``, accurate to ``tol``.

    With ``exact=True`` the closed form is used where the manifold has one.
    Otherwise the manifold is sampled densely enough (from its extent and
    curvature bound) that the nearest sample seeds a Gauss-Newton projection
    onto the true foot point.  Samples are spaced ``50 * tol`` apart (capped
    by a quarter of the reach); the projection then lands well below ``tol``.
    The reported distance is the smaller of the sampled and refined values.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if exact:
        d = m.exact_distance(x / scale)
        if d is None:
            raise ValueError(f"{m.kind} has no closed-form distance")
        return scale * d
    # samples only seed the projection: spacing well inside the reach keeps the
    # nearest sample in the basin of the true foot point
    reach = scale / max(m.curvature, 1e-12)
    spacing = min(max(50 * tol, 1e-9), 0.25 * reach)
    params, _ = _param_samples(m, scale, spacing)
    samples = scale * m.point(params)
    dist, idx = cKDTree(samples).query(x)
    t = _foot_refine(m, scale, x, params[idx].copy())
    refined = np.linalg.norm(scale * m.point(t) - x, axis=1)
    return np.minimum(dist, refined)


# --------------------------------------------------------------- regions


@dataclass(frozen=True)
class Annulus:
    """``{xi : R - beta <= |xi| <= R + beta}``."""

    R: float
    beta: float
    kind: str = field(default="annulus", init=False)

    def extent(self):
        return self.R + self.beta

    def contains(self, xi, d):
        r = np.linalg.norm(xi, axis=-1)
        tol = _EDGE * max(self.R + self.beta, 1.0)
        return (r >= self.R - self.beta - tol) & (r <= self.R + self.beta + tol)

    def to_dict(self):
        return {"type": "annulus", "R": self.R, "beta": self.beta}


@dataclass(frozen=True)
class Ball:
    """``{xi : |xi| <= R}``."""

    R: float
    kind: str = field(default="ball", init=False)

    def extent(self):
        return self.R

    def contains(self, xi, d):
        return np.linalg.norm(xi, axis=-1) <= self.R + _EDGE * max(self.R, 1.0)

    def to_dict(self):
        return {"type": "ball", "R": self.R}


@dataclass(frozen=True)
class Strip:
    """``[-beta, beta]^k x R^(d-k)`` after an optional rotation.

    ``rotation`` (a ``d x d`` orthogonal matrix, rows = new axes) is applied
    as ``xi -> rotation @ xi`` before the box test.
    """

    k: int
    beta: float
    rotation: tuple | None = None
    kind: str = field(default="strip", init=False)

    def extent(self):
        return self.beta

    def contains(self, xi, d):
        if self.rotation is not None:
            xi = xi @ np.asarray(self.rotation, dtype=float).T
        tol = _EDGE * max(self.beta, 1.0)
        return np.all(np.abs(xi[..., : self.k]) <= self.beta + tol, axis=-1)

    def to_dict(self):
        doc = {"type": "strip", "k": self.k, "beta": self.beta}
        if self.rotation is not None:
            doc["rotation"] = [list(map(float, r)) for r in self.rotation]
        return doc


@dataclass(frozen=True, eq=False)
class ManifoldShell:
    """``U_beta(R * Sigma)``: frequencies within ``beta`` of the scaled manifold.

    ``distance`` is ``"sampled"`` (default; error at most ``SHELL_SLACK *
    beta``) or ``"exact"`` for manifolds with a closed-form distance.
    """

    sigma: Manifold
    R: float
    beta: float
    distance: str = "sampled"
    kind: str = field(default="shell", init=False)

    def extent(self):
        return self.R * self.sigma.extent + self.beta

    @property
    def slack(self):
        return SHELL_SLACK * self.beta

    def contains(self, xi, d):
        flat = xi.reshape(-1, d)
        out = np.zeros(len(flat), dtype=bool)
        # only points inside the bounding shell can be members
        r = np.linalg.norm(flat, axis=1)
        cand = r <= self.extent() + self.slack
        if cand.any():
            dist = manifold_distance(
                self.sigma, self.R, flat[cand], self.slack, exact=self.distance == "exact"
            )
            out[cand] = dist <= self.beta * (1 + _EDGE)
        return out.reshape(xi.shape[:-1])

    def to_dict(self):
        return {
            "type": "shell",
            "sigma": self.sigma.to_dict(),
            "R": self.R,
            "beta": self.beta,
            "distance": self.distance,
        }

    def __eq__(self, other):
        return isinstance(other, ManifoldShell) and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(repr(self.to_dict()))


def manifold_from_dict(doc: dict) -> Manifold:
    doc = dict(doc)
    kind = doc.pop("type", None)
    try:
        cls = _MANIFOLDS[kind]
    except KeyError:
        raise ValueError(f"unknown manifold type {kind!r}") from None
    return cls(**doc)


def region_from_dict(doc: dict):
    doc = dict(doc)
    kind = doc.pop("type", None)
    if kind == "annulus":
        return Annulus(float(doc["R"]), float(doc["beta"]))
    if kind == "ball":
        return Ball(float(doc["R"]))
    if kind == "strip":
        rot = doc.get("rotation")
        return Strip(int(doc["k"]), float(doc["beta"]), None if rot is None else tuple(map(tuple, rot)))
    if kind == "shell":
        return ManifoldShell(manifold_from_dict(doc["sigma"]), float(doc["R"]), float(doc["beta"]), doc.get("distance", "sampled"))
    raise ValueError(f"unknown region type {kind!r}")


def _check_nyquist(region, grid: TorusGrid):
    if isinstance(region, Strip):
        if region.rotation is None and region.beta >= grid.nyquist:
            raise NyquistError(
                f"strip half-width beta={region.beta:g} must be below the Nyquist "
                f"frequency {grid.nyquist:g}"
            )
        return
    ext = region.extent()
    if not ext < grid.nyquist:
        raise NyquistError(
            f"{region.kind} reaches |xi| = {ext:g}; need R+beta < (2*pi/L)(N/2) = {grid.nyquist:g}"
        )


def region_mask(region, grid: TorusGrid) -> np.ndarray:
    """Boolean array over the lattice: ``mask[m] = xi_m in region``.

    Raises :class:`NyquistError` if the region does not fit in the lattice
    and :class:`EmptyRegionError` if no lattice point belongs to it.
    """
    _check_nyquist(region, grid)
    if isinstance(region, ManifoldShell) and region.sigma.dim != grid.d:
        raise ValueError(f"{region.sigma.kind} lives in d={region.sigma.dim}, grid has d={grid.d}")
    mask = region.contains(grid.xi, grid.d)
    if not mask.any():
        raise EmptyRegionError(f"{region.kind} contains no lattice point of this grid")
    return mask


def mask_points(mask: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Physical frequencies of the lattice points selected by ``mask``."""
    return grid.xi[np.asarray(mask, dtype=bool)]


def mask_flatness(mask, grid: TorusGrid, codim: int, center=None, radius=None) -> float:
    """Flatness of the mask's frequency points, optionally inside a ball."""
    pts = mask_points(mask, grid)
    if center is not None:
        if radius is None:
            raise ValueError("restricting to a ball needs a radius")
        pts = pts[np.linalg.norm(pts - np.asarray(center, dtype=float), axis=1) <= radius]
    if len(pts) == 0:
        raise EmptyRegionError("no mask point inside the restriction ball")
    return flatness(pts, codim)

"""Spatial sets on the torus, their indicators, GCC estimation and flatness.

Sets are small expression trees (:class:`SetSpec` subclasses) evaluated
pointwise and exactly.  Points are reduced modulo the torus side ``L`` before
evaluation, so every set is periodic.  Scalar damping profiles share the same
tree machinery but answer :func:`profile` rather than :func:`indicator`.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.ndimage
from scipy.optimize import minimize
from scipy.stats import qmc

from .errors import EmptyRegionError, PlsLabError
from .lattice import TorusGrid

__all__ = [
    "SetSpec",
    "Full",
    "Empty",
    "Box",
    "Ball",
    "Strips",
    "HalfSpace",
    "Union",
    "Intersection",
    "Complement",
    "Translate",
    "Scale",
    "Dilate",
    "Threshold",
    "ConstantProfile",
    "BumpProfile",
    "SmoothedSet",
    "ProfileSum",
    "grid_pattern",
    "vertical_strips",
    "indicator",
    "profile",
    "grid_indicator",
    "grid_profile",
    "set_from_dict",
    "GccBudget",
    "GccEstimate",
    "estimate_gcc",
    "segment_measure",
    "flatness",
    "minimal_enclosing_ball",
    "minimal_width_2d",
]


class SetTypeError(PlsLabError, TypeError):
    """An indicator was requested from a profile, or the other way round."""


def _as_points(x, d=None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    if d is not None and x.shape[-1] != d:
        raise ValueError(f"points have dimension {x.shape[-1]}, expected {d}")
    return x


def _wrap(diff, L):
    """Minimal-image representative of a displacement on the torus."""
    return diff - L * np.round(diff / L)


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n == 0:
        raise ValueError("direction vector must be non-zero")
    # leave already-unit vectors alone so that serialization round-trips
    if abs(n - 1.0) <= 4 * np.finfo(float).eps:
        return v
    return v / n


_REGISTRY: dict[str, type] = {}


def _register(cls):
    _REGISTRY[cls.kind] = cls
    return cls


class SetSpec:
    """Base node of a set or profile expression.

    Subclasses implement ``_indicator`` (boolean membership) or ``_value``
    (profile value) on arrays of points in ``[0, L)^d``.  Indicator nodes also
    implement ``_sdist``, a signed distance that is negative inside;
    ``exact_out`` / ``exact_in`` say whether it is the true Euclidean distance
    to the set from outside / to the complement from inside.
    """

    kind = "abstract"
    is_profile = False
    exact_out = True
    exact_in = True

    # indicator-type interface
    def _indicator(self, x, L):
        raise NotImplementedError

    def _sdist(self, x, L):
        raise NotImplementedError

    # profile-type interface
    def _value(self, x, L):
        raise NotImplementedError

    gamma_max = None

    def params(self) -> dict:
        return {}

    def to_dict(self) -> dict:
        return {"type": self.kind, **self.params()}

    def __eq__(self, other):
        return type(self) is type(other) and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(repr(self.to_dict()))

    def __repr__(self):
        return f"{type(self).__name__}({self.params()})"

    # combinator sugar
    def __or__(self, other):
        return Union([self, other])

    def __and__(self, other):
        return Intersection([self, other])

    def __invert__(self):
        return Complement(self)


def _floats(v):
    return [float(a) for a in np.atleast_1d(v)]


@_register
class Full(SetSpec):
    kind = "full"

    def _indicator(self, x, L):
        return np.ones(x.shape[:-1], dtype=bool)

    def _sdist(self, x, L):
        return np.full(x.shape[:-1], -np.inf)


@_register
class Empty(SetSpec):
    kind = "empty"

    def _indicator(self, x, L):
        return np.zeros(x.shape[:-1], dtype=bool)

    def _sdist(self, x, L):
        return np.full(x.shape[:-1], np.inf)


@_register
class Box(SetSpec):
    """Periodic axis-aligned box ``[lo, hi)`` (half open in every coordinate)."""

    kind = "box"

    def __init__(self, lo, hi):
        self.lo = np.asarray(lo, dtype=float).ravel()
        self.hi = np.asarray(hi, dtype=float).ravel()
        if self.lo.shape != self.hi.shape or np.any(self.hi < self.lo):
            raise ValueError("box needs matching lo <= hi")

    def params(self):
        return {"lo": _floats(self.lo), "hi": _floats(self.hi)}

    def _offsets(self, x, L):
        t = np.mod(x - self.lo, L)
        w = np.minimum(self.hi - self.lo, L)
        return t, w

    def _indicator(self, x, L):
        t, w = self._offsets(x, L)
        return np.all((t < w) | (w >= L), axis=-1)

    def _sdist(self, x, L):
        t, w = self._offsets(x, L)
        full = w >= L
        inside_ax = (t < w) | full
        out = np.where(inside_ax, 0.0, np.minimum(t - w, L - t))
        depth = np.where(full, np.inf, np.minimum(t, w - t))
        inside = np.all(inside_ax, axis=-1)
        return np.where(inside, -np.min(depth, axis=-1), np.sqrt(np.sum(out**2, axis=-1)))


@_register
class Ball(SetSpec):
    """Closed Euclidean ball, measured with the minimal-image distance."""

    kind = "ball"

    def __init__(self, center, radius):
        self.center = np.asarray(center, dtype=float).ravel()
        self.radius = float(radius)

    def params(self):
        return {"center": _floats(self.center), "radius": self.radius}

    def _indicator(self, x, L):
        return self._sdist(x, L) <= 0

    def _sdist(self, x, L):
        return np.linalg.norm(_wrap(x - self.center, L), axis=-1) - self.radius


@_register
class Strips(SetSpec):
    """Parallel slabs ``{x : (x.n - offset) mod period in [0, width)}``.

    ``normal`` is the direction across the strips; ``normal=(1, 0)`` gives
    vertical strips in two dimensions.  The family is periodic on the torus
    when ``L * normal`` is a multiple of ``period`` in every coordinate.
    """

    kind = "strips"

    def __init__(self, normal, width, period, offset=0.0):
        self.normal = _unit(normal)
        self.width = float(width)
        self.period = float(period)
        self.offset = float(offset)
        if not 0 <= self.width <= self.period:
            raise ValueError("strip width must lie in [0, period]")

    def params(self):
        return {
            "normal": _floats(self.normal),
            "width": self.width,
            "period": self.period,
            "offset": self.offset,
        }

    def _phase(self, x):
        # rounding makes nodes that are one period apart land on identical phases
        frac = np.round(np.mod((x @ self.normal - self.offset) / self.period, 1.0), 12)
        return self.period * np.mod(frac, 1.0)

    def _indicator(self, x, L):
        return self._phase(x) < self.width

    def _sdist(self, x, L):
        t = self._phase(x)
        inside = t < self.width
        return np.where(
            inside,
            -np.minimum(t, self.width - t),
            np.minimum(t - self.width, self.period - t),
        )


@_register
class HalfSpace(SetSpec):
    """``{x : x.n >= offset}`` for ``x`` reduced to the fundamental domain."""

    kind = "halfspace"

    def __init__(self, normal, offset):
        self.normal = _unit(normal)
        self.offset = float(offset)

    def params(self):
        return {"normal": _floats(self.normal), "offset": self.offset}

    def _indicator(self, x, L):
        return x @ self.normal >= self.offset

    def _sdist(self, x, L):
        return self.offset - x @ self.normal


class _Nary(SetSpec):
    def __init__(self, children):
        self.children = list(children)
        if not self.children:
            raise ValueError(f"{self.kind} needs at least one child")
        for c in self.children:
            if c.is_profile:
                raise SetTypeError(f"{self.kind} combines indicator sets, got a profile")

    def to_dict(self):
        return {"type": self.kind, "children": [c.to_dict() for c in self.children]}

    def __repr__(self):
        return f"{type(self).__name__}({self.children!r})"


@_register
class Union(_Nary):
    kind = "union"

    @property
    def exact_out(self):
        return all(c.exact_out for c in self.children)

    @property
    def exact_in(self):
        return len(self.children) == 1 and self.children[0].exact_in

    def _indicator(self, x, L):
        return np.logical_or.reduce([c._indicator(x, L) for c in self.children])

    def _sdist(self, x, L):
        return np.minimum.reduce([c._sdist(x, L) for c in self.children])


@_register
class Intersection(_Nary):
    kind = "intersection"

    @property
    def exact_out(self):
        return len(self.children) == 1 and self.children[0].exact_out

    @property
    def exact_in(self):
        return all(c.exact_in for c in self.children)

    def _indicator(self, x, L):
        return np.logical_and.reduce([c._indicator(x, L) for c in self.children])

    def _sdist(self, x, L):
        return np.maximum.reduce([c._sdist(x, L) for c in self.children])


class _Unary(SetSpec):
    def __init__(self, child):
        if child.is_profile:
            raise SetTypeError(f"{self.kind} applies to indicator sets, got a profile")
        self.child = child

    @property
    def exact_out(self):
        return self.child.exact_out

    @property
    def exact_in(self):
        return self.child.exact_in

    def to_dict(self):
        return {"type": self.kind, **self.params(), "child": self.child.to_dict()}

    def __repr__(self):
        return f"{type(self).__name__}({self.child!r}, {self.params()})"


@_register
class Complement(_Unary):
    kind = "complement"

    @property
    def exact_out(self):
        return self.child.exact_in

    @property
    def exact_in(self):
        return self.child.exact_out

    def _indicator(self, x, L):
        return ~self.child._indicator(x, L)

    def _sdist(self, x, L):
        return -self.child._sdist(x, L)


@_register
class Translate(_Unary):
    kind = "translate"

    def __init__(self, child, shift):
        super().__init__(child)
        self.shift = np.asarray(shift, dtype=float).ravel()

    def params(self):
        return {"shift": _floats(self.shift)}

    def _indicator(self, x, L):
        return self.child._indicator(np.mod(x - self.shift, L), L)

    def _sdist(self, x, L):
        return self.child._sdist(np.mod(x - self.shift, L), L)


@_register
class Scale(_Unary):
    """``factor * child``; the child lives on the torus of side ``L / factor``."""

    kind = "scale"

    def __init__(self, child, factor):
        super().__init__(child)
        self.factor = float(factor)
        if not self.factor > 0:
            raise ValueError("scale factor must be positive")

    def params(self):
        return {"factor": self.factor}

    def _indicator(self, x, L):
        return self.child._indicator(x / self.factor, L / self.factor)

    def _sdist(self, x, L):
        return self.factor * self.child._sdist(x / self.factor, L / self.factor)


@_register
class Dilate(_Unary):
    """Open ``delta``-neighbourhood ``U_delta(child)``.

    Pointwise evaluation needs an exact outside distance for the child.
    Otherwise only grid evaluation is available, via morphological dilation
    of the node indicator by a Euclidean ball (see :func:`grid_indicator`).
    """

    kind = "dilate"

    def __init__(self, child, delta):
        super().__init__(child)
        self.delta = float(delta)
        if self.delta < 0:
            raise ValueError("dilation radius must be non-negative")

    @property
    def exact_in(self):
        return self.delta == 0 and self.child.exact_in

    def params(self):
        return {"delta": self.delta}

    def _indicator(self, x, L):
        if self.delta == 0:
            return self.child._indicator(x, L)
        if not self.child.exact_out:
            raise PlsLabError("pointwise dilation needs an exact distance; use grid_indicator")
        return self.child._indicator(x, L) | (self.child._sdist(x, L) < self.delta)

    def _sdist(self, x, L):
        return self.child._sdist(x, L) - self.delta


@_register
class Threshold(SetSpec):
    """Superlevel set ``{profile >= eps}`` of a profile."""

    kind = "threshold"
    exact_out = False
    exact_in = False

    def __init__(self, child, eps):
        if not child.is_profile:
            raise SetTypeError("threshold applies to profiles")
        self.child = child
        self.eps = float(eps)
        if not self.eps > 0:
            raise ValueError("threshold eps must be positive")

    def params(self):
        return {"eps": self.eps}

    def to_dict(self):
        return {"type": self.kind, "eps": self.eps, "child": self.child.to_dict()}

    def _indicator(self, x, L):
        return self.child._value(x, L) >= self.eps

    def _sdist(self, x, L):
        raise PlsLabError("threshold sets have no distance function")


# ---------------------------------------------------------------- profiles


def _smooth_step(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.clip(t, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / t), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / (1.0 - t)), 0.0)
    return a / (a + b)


class _Profile(SetSpec):
    is_profile = True
    exact_out = False
    exact_in = False

    def _indicator(self, x, L):
        raise SetTypeError("indicator requested on a profile; pass eps to threshold it")


@_register
class ConstantProfile(_Profile):
    kind = "constant"

    def __init__(self, value):
        self.value = float(value)
        if self.value < 0:
            raise ValueError("damping must be non-negative")
        self.gamma_max = self.value

    def params(self):
        return {"value": self.value}

    def _value(self, x, L):
        return np.full(x.shape[:-1], self.value)


@_register
class BumpProfile(_Profile):
    """``amplitude * exp(1 - 1/(1 - (r/radius)^2))`` inside the ball, 0 outside."""

    kind = "bump"

    def __init__(self, center, radius, amplitude=1.0):
        self.center = np.asarray(center, dtype=float).ravel()
        self.radius = float(radius)
        self.amplitude = float(amplitude)
        if self.amplitude < 0 or not self.radius > 0:
            raise ValueError("bump needs amplitude >= 0 and radius > 0")
        self.gamma_max = self.amplitude

    def params(self):
        return {"center": _floats(self.center), "radius": self.radius, "amplitude": self.amplitude}

    def _value(self, x, L):
        r = np.linalg.norm(_wrap(x - self.center, L), axis=-1) / self.radius
        with np.errstate(divide="ignore", over="ignore"):
            v = np.where(r < 1, np.exp(1.0 - 1.0 / (1.0 - np.minimum(r, 1.0) ** 2)), 0.0)
        return self.amplitude * v


@_register
class SmoothedSet(_Profile):
    """``amplitude`` on a set, falling smoothly to 0 within ``ramp`` outside it."""

    kind = "smoothed"

    def __init__(self, child, amplitude=1.0, ramp=0.1):
        if child.is_profile:
            raise SetTypeError("smoothed applies to indicator sets")
        self.child = child
        self.amplitude = float(amplitude)
        self.ramp = float(ramp)
        if self.amplitude < 0 or not self.ramp > 0:
            raise ValueError("smoothed needs amplitude >= 0 and ramp > 0")
        self.gamma_max = self.amplitude

    def params(self):
        return {"amplitude": self.amplitude, "ramp": self.ramp}

    def to_dict(self):
        return {"type": self.kind, **self.params(), "child": self.child.to_dict()}

    def _value(self, x, L):
        sd = self.child._sdist(x, L)
        return self.amplitude * _smooth_step(1.0 - sd / self.ramp)


@_register
class ProfileSum(_Profile):
    kind = "sum"

    def __init__(self, children):
        self.children = list(children)
        if not all(c.is_profile for c in self.children):
            raise SetTypeError("sum combines profiles")
        self.gamma_max = float(sum(c.gamma_max for c in self.children))

    def to_dict(self):
        return {"type": self.kind, "children": [c.to_dict() for c in self.children]}

    def _value(self, x, L):
        return np.sum([c._value(x, L) for c in self.children], axis=0)


def set_from_dict(doc: dict) -> SetSpec:
    """Inverse of ``SetSpec.to_dict``."""
    if not isinstance(doc, dict) or "type" not in doc:
        raise ValueError("set document needs a 'type' key")
    doc = dict(doc)
    kind = doc.pop("type")
    try:
        cls = _REGISTRY[kind]
    except KeyError:
        raise ValueError(f"unknown set type {kind!r}") from None
    if "children" in doc:
        doc["children"] = [set_from_dict(c) for c in doc["children"]]
    if "child" in doc:
        doc["child"] = set_from_dict(doc["child"])
    return cls(**doc)


# ------------------------------------------------------------ constructors


def grid_pattern(period, width, d=2, offset=0.0):
    """Union of axis-normal strip families, one per coordinate direction."""
    return Union([Strips(np.eye(d)[i], width, period, offset) for i in range(d)])


def vertical_strips(period, width, d=2, offset=0.0):
    """Strips constant in every coordinate but the first (fails the 1-GCC)."""
    return Strips(np.eye(d)[0], width, period, offset)


# -------------------------------------------------------------- evaluation


def indicator(spec: SetSpec, x, L: float, eps: float | None = None) -> np.ndarray:
    """Membership of the points ``x`` (last axis = coordinates) in ``spec``.

    Profiles are accepted only with an explicit ``eps`` and then mean
    ``{gamma >= eps}``.
    """
    x = np.mod(_as_points(x), L)
    if spec.is_profile:
        if eps is None:
            raise SetTypeError("indicator on a profile needs an explicit eps")
        return spec._value(x, L) >= eps
    return spec._indicator(x, L)


def profile(spec: SetSpec, x, L: float) -> np.ndarray:
    """Value of a damping profile at the points ``x``."""
    if not spec.is_profile:
        raise SetTypeError(f"profile requested on indicator set {spec.kind!r}")
    return spec._value(np.mod(_as_points(x), L), L)


def _needs_morphology(spec):
    if isinstance(spec, Dilate):
        return spec.delta > 0 and not spec.child.exact_out or _needs_morphology(spec.child)
    for attr in ("children",):
        for c in getattr(spec, attr, []):
            if _needs_morphology(c):
                return True
    child = getattr(spec, "child", None)
    return child is not None and _needs_morphology(child)


def _dilate_mask(mask: np.ndarray, grid: TorusGrid, delta: float) -> np.ndarray:
    """Nodes within distance < delta of a true node, with periodic wrap."""
    pad = int(math.ceil(delta / grid.h)) + 1
    tiled = np.pad(mask, pad, mode="wrap")
    dist = scipy.ndimage.distance_transform_edt(~tiled, sampling=grid.h)
    core = tuple(slice(pad, pad + grid.N) for _ in range(grid.d))
    return dist[core] < delta


def _grid_eval(spec: SetSpec, grid: TorusGrid) -> np.ndarray:
    if isinstance(spec, Dilate) and spec.delta > 0 and not spec.child.exact_out:
        return _dilate_mask(_grid_eval(spec.child, grid), grid, spec.delta)
    if not _needs_morphology(spec):
        return spec._indicator(grid.nodes, grid.L)
    if isinstance(spec, Union):
        return np.logical_or.reduce([_grid_eval(c, grid) for c in spec.children])
    if isinstance(spec, Intersection):
        return np.logical_and.reduce([_grid_eval(c, grid) for c in spec.children])
    if isinstance(spec, Complement):
        return ~_grid_eval(spec.child, grid)
    raise PlsLabError(f"cannot evaluate {spec.kind!r} around a morphological dilation on a grid")


def grid_indicator(spec: SetSpec, grid: TorusGrid, eps: float | None = None) -> np.ndarray:
    """Indicator sampled at the grid nodes."""
    if spec.is_profile:
        return indicator(spec, grid.nodes, grid.L, eps=eps)
    return _grid_eval(spec, grid)


def grid_profile(spec: SetSpec, grid: TorusGrid) -> np.ndarray:
    return profile(spec, grid.nodes, grid.L)


# ------------------------------------------------------------ GCC estimator


@dataclass
class GccBudget:
    """Sampling budget for :func:`estimate_gcc`."""

    centers: int = 256
    random_orientations: int = 16
    refine_steps: int = 24
    refine_candidates: int = 4

    def __post_init__(self):
        if self.centers <= 0:
            raise ValueError("GCC budget must include at least one center")
        if self.refine_steps < 20:
            raise ValueError("at least 20 refinement steps are required")


@dataclass
class GccEstimate:
    """Sampled-and-refined upper bound on ``inf_Q H^k(Q n E) / ell^k``."""

    k: int
    ell: float
    gamma_hat: float
    witness_center: np.ndarray
    witness_frame: np.ndarray
    samples: int
    resolution: int
    eps: float | None = None
    refine_steps: int = 0

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "ell": self.ell,
            "gamma_hat": self.gamma_hat,
            "witness_center": _floats(self.witness_center),
            "witness_frame": np.asarray(self.witness_frame).tolist(),
            "samples": self.samples,
            "resolution": self.resolution,
            "eps": self.eps,
            "refine_steps": self.refine_steps,
        }


_DEFAULT_RESOLUTION = {1: 1024, 2: 128, 3: 64}


def _rational_directions(d, bound=3):
    dirs = []
    for v in itertools.product(range(-bound, bound + 1), repeat=d):
        v = np.array(v)
        if not v.any() or math.gcd(*map(int, np.abs(v))) != 1:
            continue
        first = v[np.nonzero(v)[0][0]]
        if first < 0:
            continue
        dirs.append(v / np.linalg.norm(v))
    return dirs


def _complete_frame(vectors, k, d):
    q, _ = np.linalg.qr(np.column_stack(vectors))
    return q[:, :k].T


def _candidate_frames(k, d, n_random, rng):
    frames = [np.eye(d)[list(c)] for c in itertools.combinations(range(d), k)]
    if k < d:
        rational = _rational_directions(d)
        if k == 1:
            frames += [v[None, :] for v in rational]
        else:
            # k-planes orthogonal to a rational normal (d=3, k=2)
            for n in rational:
                basis = np.linalg.svd(n[None, :])[2][1:]
                frames.append(basis[:k])
    for _ in range(n_random):
        g = rng.standard_normal((d, d))
        q, r = np.linalg.qr(g)
        q = q * np.sign(np.diag(r))
        frames.append(q[:, :k].T)
    out, seen = [], set()
    for f in frames:
        # flipping a frame vector gives the same cube
        signs = np.sign(f[np.arange(k), np.argmax(np.abs(f) > 1e-12, axis=1)])
        key = tuple(np.round(f * signs[:, None], 10).ravel())
        if key not in seen:
            seen.add(key)
            out.append(f)
    return out


def _quadrature_nodes(k, ell, n):
    t = (np.arange(n) + 0.5) / n * ell - ell / 2
    return np.stack(np.meshgrid(*([t] * k), indexing="ij"), axis=-1).reshape(-1, k)


def _cube_ratios(spec, centers, frames, tq, L, eps, chunk_points=2_000_000):
    """Fraction of quadrature nodes in the set, for every (center, frame) pair."""
    nq = tq.shape[0]
    offsets = np.stack([tq @ f for f in frames])  # (F, nq, d)
    pairs = [(i, j) for i in range(len(centers)) for j in range(len(frames))]
    out = np.empty(len(pairs))
    step = max(1, chunk_points // nq)
    for s in range(0, len(pairs), step):
        blk = pairs[s : s + step]
        ci = np.array([p[0] for p in blk])
        fj = np.array([p[1] for p in blk])
        pts = centers[ci][:, None, :] + offsets[fj]
        out[s : s + len(blk)] = indicator(spec, pts, L, eps=eps).mean(axis=1)
    return out, pairs


def _plane_rotation(d, i, j, theta):
    r = np.eye(d)
    c, s = math.cos(theta), math.sin(theta)
    r[i, i] = r[j, j] = c
    r[i, j], r[j, i] = -s, s
    return r


def _refine(spec, center, frame, tq, L, eps, steps, ell):
    d = center.size

    def ratio(c, f):
        return float(indicator(spec, c[None, :] + tq @ f, L, eps=eps).mean())

    best = ratio(center, frame)
    cstep, astep = ell / 4, 0.2
    planes = list(itertools.combinations(range(d), 2))
    for _ in range(steps):
        improved = False
        for axis in range(d):
            for sgn in (1.0, -1.0):
                c = center.copy()
                c[axis] += sgn * cstep
                val = ratio(c, frame)
                if val < best:
                    best, center, improved = val, np.mod(c, L), True
        for i, j in planes:
            for sgn in (1.0, -1.0):
                f = frame @ _plane_rotation(d, i, j, sgn * astep)
                val = ratio(center, f)
                if val < best:
                    best, frame, improved = val, f, True
        if not improved:
            cstep, astep = cstep / 2, astep / 2
    return best, center, frame


def estimate_gcc(
    spec: SetSpec,
    k: int,
    ell: float,
    *,
    d: int,
    L: float,
    budget: GccBudget | int | None = None,
    seed: int = 0,
    resolution: int | None = None,
    eps: float | None = None,
) -> GccEstimate:
    """Estimate the GCC constant of ``spec`` for k-cubes of side ``ell``.

    Cube centers come from a scrambled Halton sequence plus uniform draws,
    orientations from axis frames, rational directions and random rotations.
    The intersection measure of every cube is a midpoint tensor quadrature
    with ``resolution`` nodes per side.  The smallest ratios found are then
    polished by coordinate descent on center and orientation.  The result is
    a minimum over cubes actually evaluated, hence an upper bound on the
    true infimum.
    """
    if budget is None:
        budget = GccBudget()
    elif isinstance(budget, int):
        if budget <= 0:
            raise ValueError("GCC budget must be positive")
        budget = GccBudget(centers=budget)
    if not 1 <= k <= d:
        raise ValueError(f"cube dimension k={k} must lie in [1, {d}]")
    if not 0 < ell <= L / 2:
        raise ValueError(f"side ell={ell} must lie in (0, L/2]")
    if spec.is_profile and eps is None:
        raise SetTypeError("GCC of a profile needs an explicit threshold eps")
    resolution = resolution or _DEFAULT_RESOLUTION[k]
    if resolution < 64 and k == 1:
        raise ValueError("segment quadrature needs at least 64 nodes")

    rng = np.random.default_rng(seed)
    n_qmc = (budget.centers + 1) // 2
    halton = qmc.Halton(d=d, scramble=True, seed=np.random.default_rng(seed + 1))
    centers = np.vstack([halton.random(n_qmc), rng.random((budget.centers - n_qmc, d))]) * L
    frames = _candidate_frames(k, d, budget.random_orientations, rng)
    tq = _quadrature_nodes(k, ell, resolution)

    ratios, pairs = _cube_ratios(spec, centers, frames, tq, L, eps)
    order = np.argsort(ratios, kind="stable")
    best = float(ratios[order[0]])
    i, j = pairs[order[0]]
    w_center, w_frame = centers[i], frames[j]
    if best > 0:
        for idx in order[: budget.refine_candidates]:
            i, j = pairs[idx]
            val, c, f = _refine(spec, centers[i].copy(), frames[j], tq, L, eps, budget.refine_steps, ell)
            if val < best:
                best, w_center, w_frame = val, c, f
    return GccEstimate(
        k=k,
        ell=float(ell),
        gamma_hat=float(best),
        witness_center=np.asarray(w_center),
        witness_frame=np.asarray(w_frame),
        samples=len(pairs),
        resolution=resolution,
        eps=eps,
        refine_steps=budget.refine_steps,
    )


def segment_measure(spec: SetSpec, center, direction, length, L, resolution=4096, eps=None):
    """Fraction of a segment lying in ``spec`` (midpoint rule)."""
    t = _quadrature_nodes(1, length, resolution)
    pts = np.asarray(center, float)[None, :] + t * _unit(direction)[None, :]
    return float(indicator(spec, pts, L, eps=eps).mean())


# ------------------------------------------------------------------ flatness


def _ball_through(support):
    """Smallest ball with every support point on its boundary."""
    if not support:
        return None, -1.0
    p0 = support[0]
    if len(support) == 1:
        return p0.copy(), 0.0
    a = np.array([p - p0 for p in support[1:]])
    rhs = 0.5 * np.sum(a**2, axis=1)
    lam = np.linalg.lstsq(a @ a.T, rhs, rcond=None)[0]
    c = p0 + lam @ a
    return c, float(np.max([np.linalg.norm(p - c) for p in support]))


def _welzl(points, n, support, dim):
    center, radius = _ball_through(support)
    if len(support) == dim + 1:
        return center, radius
    for i in range(n):
        p = points[i]
        if center is None or np.linalg.norm(p - center) > radius * (1 + 1e-12) + 1e-14:
            center, radius = _welzl(points, i, support + [p], dim)
    return center, radius


def minimal_enclosing_ball(points, seed: int = 0):
    """Exact minimal enclosing ball (Welzl's algorithm, move-free variant).

    Returns ``(center, radius)``.  Intended for dimension <= 3.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.size == 0:
        raise EmptyRegionError("point set is empty")
    pts = np.unique(pts, axis=0)
    pts = pts[np.random.default_rng(seed).permutation(len(pts))]
    center, radius = _welzl(pts, len(pts), [], pts.shape[1])
    return center, radius


def _convex_hull_2d(pts):
    """Andrew's monotone chain; counter-clockwise, no repeated endpoint."""
    pts = sorted(map(tuple, np.unique(pts, axis=0)))
    if len(pts) <= 2:
        return np.array(pts)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def minimal_width_2d(points) -> float:
    """Minimal slab width of a planar point set by rotating calipers."""
    hull = _convex_hull_2d(np.asarray(points, dtype=float))
    h = len(hull)
    if h <= 2:
        return 0.0
    best = np.inf
    j = 1
    for i in range(h):
        p, q = hull[i], hull[(i + 1) % h]
        e = q - p
        norm = math.hypot(*e)

        def dist(idx):
            r = hull[idx % h] - p
            return abs(e[0] * r[1] - e[1] * r[0]) / norm

        while dist(j + 1) >= dist(j) and (j + 1) % h != i:
            j += 1
        best = min(best, dist(j))
    return float(best)


def _fibonacci_hemisphere(n):
    i = np.arange(n) + 0.5
    z = i / n  # upper hemisphere suffices: directions are unoriented
    phi = i * math.pi * (3 - math.sqrt(5))
    r = np.sqrt(1 - z**2)
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def _sph(angles):
    th, ph = angles
    return np.array([math.sin(th) * math.cos(ph), math.sin(th) * math.sin(ph), math.cos(th)])


def _orthobasis(u):
    return np.linalg.svd(u[None, :])[2][1:]


def _plane_halfwidth(pts, u):
    proj = pts @ u
    return 0.5 * float(np.max(proj, axis=0) - np.min(proj, axis=0))


def _line_radius(pts, u):
    return minimal_enclosing_ball(pts @ _orthobasis(u).T)[1]


def _flatness_3d(pts, codim, n_dirs=12000, n_refine=5):
    try:
        from scipy.spatial import ConvexHull

        pts = pts[ConvexHull(pts).vertices]
    except Exception:  # degenerate hull (coplanar/collinear): keep all points
        pass
    dirs = _fibonacci_hemisphere(n_dirs)
    proj = pts @ dirs.T
    widths = 0.5 * (proj.max(axis=0) - proj.min(axis=0))
    if codim == 2:
        objective = _plane_halfwidth
        scores = widths
    else:
        objective = _line_radius
        # enclosing radius of the projection lies in [diam/2, diam/sqrt(3)];
        # evaluate exactly only where the lower bound can still win
        diam = np.zeros(n_dirs)
        for a in range(len(pts)):
            dvec = pts - pts[a]
            perp = dvec[:, :, None] - (dvec @ dirs.T)[:, None, :] * dirs.T[None, :, :]
            diam = np.maximum(diam, np.linalg.norm(perp, axis=1).max(axis=0))
        upper = float(np.min(diam) / math.sqrt(3))
        scores = np.full(n_dirs, np.inf)
        for idx in np.nonzero(diam / 2 <= upper * (1 + 1e-12))[0]:
            scores[idx] = objective(pts, dirs[idx])
    best_idx = np.argsort(scores, kind="stable")[:n_refine]
    best = float(np.min(scores))
    for idx in best_idx:
        u = dirs[idx]
        start = [math.acos(np.clip(u[2], -1, 1)), math.atan2(u[1], u[0])]
        res = minimize(
            lambda a: objective(pts, _sph(a)),
            start,
            method="Nelder-Mead",
            options={"xatol": 1e-7, "fatol": 1e-12, "maxiter": 400},
        )
        best = min(best, float(res.fun))
    return best


def flatness(points, codim: int) -> float:
    """``inf`` over ``codim``-dimensional affine planes of ``sup dist``.

    ``codim`` is the dimension ``d - k`` of the approximating plane.  Exact
    for ``codim = 0`` (minimal enclosing ball) and for ``codim = 1`` in two
    dimensions (half the minimal width, rotating calipers).  In three
    dimensions ``codim = 1, 2`` is approximated from above by sampling
    plane orientations on a Fibonacci sphere and polishing the best few.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.size == 0:
        raise EmptyRegionError("flatness of an empty point set")
    d = pts.shape[1]
    if not 0 <= codim <= d:
        raise ValueError(f"plane dimension {codim} must lie in [0, {d}]")
    if codim == d or len(pts) == 1:
        return 0.0
    if codim == 0:
        return float(minimal_enclosing_ball(pts)[1])
    if d == 2:
        return 0.5 * minimal_width_2d(pts)
    if d == 3:
        return _flatness_3d(np.unique(pts, axis=0), codim)
    raise ValueError("flatness is implemented for d <= 3")

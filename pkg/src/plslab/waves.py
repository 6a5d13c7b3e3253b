"""Damped fractional wave equation on the torus.

The equation ``w_tt + gamma(x) w_t + (-Laplace + 1)^(s/2) w = 0`` is advanced
by Strang splitting into two flows that are each solved exactly:

* damping, ``v' = -gamma v`` pointwise, i.e. ``v <- exp(-gamma dt) v``;
* dispersion, a rotation of every Fourier mode ``(w_m, v_m)`` at frequency
  ``omega_m = (|xi_m|^2 + 1)^(s/4)``.

The rotation preserves the energy

    E^2 = sum_m (|xi_m|^2+1)^(s/2) |w_m|^2 + sum_m |v_m|^2

exactly and the damping flow never increases it, so there is no step size
restriction and the undamped energy is conserved to rounding.

Snapshot files (:func:`write_snapshot`) are flat little-endian float64:
four header values ``d, N, L, t`` followed by the field ``w`` in row-major
(C) order as ``(real, imag)`` pairs.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, replace

import numpy as np

from .errors import BudgetError, EmptyRegionError
from .geometry import SetSpec, grid_profile
from .lattice import TorusGrid, forward_transform, inverse_transform

__all__ = [
    "WaveState",
    "DecayFit",
    "DecaySeries",
    "energy",
    "damping_field",
    "step",
    "evolve",
    "fit_decay",
    "modal_solution",
    "modal_energy",
    "gaussian_bump",
    "spectral_filter",
    "initial_state",
    "write_snapshot",
    "read_snapshot",
]

MAX_STEPS = 10_000_000


@dataclass
class WaveState:
    """Displacement ``w`` and velocity ``v = w_t`` at time ``t``."""

    grid: TorusGrid
    w: np.ndarray
    v: np.ndarray
    s: float
    t: float = 0.0

    def __post_init__(self):
        self.w = np.asarray(self.grid.check(self.w, "w"), dtype=complex)
        self.v = np.asarray(self.grid.check(self.v, "v"), dtype=complex)
        if not 0 < self.s <= 2:
            raise ValueError(f"fractional order must lie in (0, 2], got {self.s}")

    def scaled(self, a: complex) -> "WaveState":
        return replace(self, w=a * self.w, v=a * self.v)


def _omega(grid: TorusGrid, s: float) -> np.ndarray:
    return (grid.xi2 + 1.0) ** (s / 4)


def _energy_hat(what, vhat, omega) -> float:
    e2 = np.sum((omega * np.abs(what)) ** 2) + np.sum(np.abs(vhat) ** 2)
    return float(np.sqrt(e2))


def energy(state: WaveState) -> float:
    """``(||(-Laplace+1)^(s/4) w||^2 + ||w_t||^2)^(1/2)``, evaluated in frequency space."""
    omega = _omega(state.grid, state.s)
    return _energy_hat(
        forward_transform(state.w, state.grid), forward_transform(state.v, state.grid), omega
    )


def damping_field(damping, grid: TorusGrid) -> np.ndarray:
    """Sample a damping profile, scalar or array on the grid nodes.

    Raises ``ValueError`` if any value is negative.
    """
    if damping is None:
        gamma = np.zeros(grid.shape)
    elif isinstance(damping, SetSpec):
        gamma = grid_profile(damping, grid)
    elif np.ndim(damping) == 0:
        gamma = np.full(grid.shape, float(damping))
    else:
        gamma = np.asarray(grid.check(damping, "damping"), dtype=float)
    if np.any(gamma < 0):
        raise ValueError("damping must be non-negative everywhere")
    return gamma


class _Propagator:
    """Precomputed factors for repeated steps of one size.

    The state is carried as ``(w_hat, v)``: ``w`` only ever meets the rotation,
    while ``v`` alternates between physical space (damping) and frequency
    space (rotation).  That costs one forward and one inverse FFT per step.
    """

    def __init__(self, grid, s, gamma, dt):
        self.grid = grid
        self.omega = _omega(grid, s)
        self.cos = np.cos(self.omega * dt)
        self.sin = np.sin(self.omega * dt)
        self.half = np.exp(-gamma * dt / 2)
        self.full = self.half * self.half
        self.damped = bool(np.any(gamma > 0))

    def rotate(self, what, v):
        vhat = forward_transform(v, self.grid)
        w_new = what * self.cos + vhat * (self.sin / self.omega)
        v_new = -what * (self.omega * self.sin) + vhat * self.cos
        return w_new, inverse_transform(v_new, self.grid)

    def run(self, what, v, n):
        """``n`` Strang steps with the interior half-steps fused."""
        if n == 0:
            return what, v
        if self.damped:
            v = v * self.half
        for i in range(n):
            what, v = self.rotate(what, v)
            if self.damped:
                v = v * (self.full if i < n - 1 else self.half)
        return what, v


def step(state: WaveState, dt: float, damping=None) -> WaveState:
    """One Strang step: half damping, full rotation, half damping."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    gamma = damping_field(damping, state.grid)
    prop = _Propagator(state.grid, state.s, gamma, dt)
    what, v = prop.run(forward_transform(state.w, state.grid), state.v, 1)
    return WaveState(state.grid, inverse_transform(what, state.grid), v, state.s, state.t + dt)


@dataclass
class DecaySeries:
    """Energy samples ``energy[i]`` at times ``t[i]`` plus the final state."""

    t: np.ndarray
    energy: np.ndarray
    final: WaveState | None = None
    dt: float = 0.0
    steps: int = 0

    def to_csv(self) -> str:
        lines = ["t,energy"]
        lines += [f"{a!r},{b!r}" for a, b in zip(self.t.tolist(), self.energy.tolist())]
        return "\n".join(lines) + "\n"


def evolve(
    state: WaveState,
    damping,
    dt: float,
    horizon: float,
    stride: int = 1,
    snapshot=None,
) -> DecaySeries:
    """Advance to ``state.t + horizon`` and record the energy every ``stride`` steps.

    Parameters
    ----------
    state : WaveState
        Initial data; not modified.
    damping : SetSpec profile, float, array or None
    dt : float
        Step size.  ``horizon / dt`` is rounded to the nearest integer and
        must not exceed ``MAX_STEPS``.
    stride : int
        Steps between energy samples.  The first sample is the initial state.
    snapshot : callable, optional
        Called as ``snapshot(state)`` at every sample.

    Returns
    -------
    DecaySeries
    """
    if not dt > 0 or not horizon >= 0:
        raise ValueError("need dt > 0 and horizon >= 0")
    n_steps = int(round(horizon / dt))
    if n_steps > MAX_STEPS:
        raise BudgetError(f"{n_steps} steps requested, budget is {MAX_STEPS}")
    stride = max(1, int(stride))
    grid = state.grid
    prop = _Propagator(grid, state.s, damping_field(damping, grid), dt)
    what = forward_transform(state.w, grid)
    v = state.v.copy()

    def current(k):
        return WaveState(grid, inverse_transform(what, grid), v, state.s, state.t + k * dt)

    ts, es = [state.t], [_energy_hat(what, forward_transform(v, grid), prop.omega)]
    if snapshot is not None:
        snapshot(current(0))
    done = 0
    while done < n_steps:
        n = min(stride, n_steps - done)
        what, v = prop.run(what, v, n)
        done += n
        ts.append(state.t + done * dt)
        es.append(_energy_hat(what, forward_transform(v, grid), prop.omega))
        if snapshot is not None:
            snapshot(current(done))
    return DecaySeries(np.array(ts), np.array(es), current(done), dt, n_steps)


# ----------------------------------------------------------------- fitting


@dataclass
class DecayFit:
    """Least-squares fit of ``log E`` on a time window.

    ``value`` is the exponent ``alpha`` (polynomial model,
    ``E ~ (1+t)^alpha``) or the rate ``omega`` (exponential model,
    ``E ~ exp(-omega t)``).  ``residual`` is the RMS misfit in ``log E``.
    """

    model: str
    value: float
    window: tuple[float, float]
    residual: float
    samples: int
    intercept: float = 0.0

    def to_dict(self) -> dict:
        key = "alpha" if self.model == "polynomial" else "omega"
        return {
            "model": self.model,
            key: self.value,
            "window": list(self.window),
            "residual": self.residual,
            "samples": self.samples,
        }


def fit_decay(series, model: str = "polynomial", t0=None, t1=None, min_samples: int = 50) -> DecayFit:
    """Fit a decay law to ``series`` (a :class:`DecaySeries` or ``(t, E)`` pair).

    The window defaults to the last 80% of the record.
    """
    if isinstance(series, DecaySeries):
        t, e = series.t, series.energy
    else:
        t, e = (np.asarray(a, dtype=float) for a in series)
    if model not in ("polynomial", "exponential"):
        raise ValueError(f"unknown decay model {model!r}")
    t_end = float(t[-1])
    t0 = t[0] + 0.2 * (t_end - t[0]) if t0 is None else float(t0)
    t1 = t_end if t1 is None else float(t1)
    sel = (t >= t0) & (t <= t1)
    if np.count_nonzero(sel) < min_samples:
        raise EmptyRegionError(
            f"fit window [{t0}, {t1}] holds {np.count_nonzero(sel)} samples, need {min_samples}"
        )
    ew = e[sel]
    if np.any(ew <= 0):
        raise ValueError("energy series contains zero entries; log decay is undefined")
    y = np.log(ew)
    x = np.log1p(t[sel]) if model == "polynomial" else t[sel]
    slope, icept = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * x + icept)) ** 2)))
    value = float(slope) if model == "polynomial" else float(-slope)
    return DecayFit(model, value, (float(t0), float(t1)), resid, int(sel.sum()), float(icept))


# ----------------------------------------------------------- modal oracle


def modal_solution(omega, c, u0, v0, t):
    """Closed-form ``(u, u')`` for ``u'' + c u' + omega^2 u = 0``.

    Works in all three damping regimes through a complex square root; the
    critical case uses the ``sin(mu t)/mu -> t`` limit.
    """
    t = np.asarray(t, dtype=float)
    mu = np.lib.scimath.sqrt(omega**2 - c**2 / 4 + 0j)
    decay = np.exp(-c * t / 2)
    cos = np.cos(mu * t)
    sinc = t * np.sinc(mu * t / np.pi)  # sin(mu t)/mu, finite at mu = 0
    u = decay * (u0 * cos + (v0 + c * u0 / 2) * sinc)
    # u' from differentiating the expression above
    du = decay * (v0 * cos - (c * v0 / 2 + omega**2 * u0) * sinc)
    if np.isrealobj(u0) and np.isrealobj(v0):
        return u.real, du.real
    return u, du


def modal_energy(omega, c, u0, v0, t):
    u, du = modal_solution(omega, c, u0, v0, t)
    return np.sqrt(omega**2 * np.abs(u) ** 2 + np.abs(du) ** 2)


# ------------------------------------------------------------ initial data


def gaussian_bump(grid: TorusGrid, center=None, width=None) -> np.ndarray:
    """Real Gaussian ``exp(-|x - center|^2 / (2 width^2))`` with periodic distance.

    ``width`` defaults to ``L/16`` and must cover at least 8 grid cells.
    """
    center = np.full(grid.d, grid.L / 2) if center is None else np.asarray(center, float)
    width = grid.L / 16 if width is None else float(width)
    if width < 8 * grid.h:
        raise ValueError(f"bump width {width} is under 8 grid cells ({8 * grid.h})")
    diff = grid.nodes - center
    diff -= grid.L * np.round(diff / grid.L)
    return np.exp(-np.sum(diff**2, axis=-1) / (2 * width**2))


def spectral_filter(u: np.ndarray, grid: TorusGrid, power: float = 1.0) -> np.ndarray:
    """Multiply the Fourier coefficients of ``u`` by ``(1 + |xi|^2)^(-power)``."""
    uhat = forward_transform(u, grid)
    return inverse_transform(uhat * (1.0 + grid.xi2) ** (-power), grid)


def initial_state(grid: TorusGrid, s: float, center=None, width=None, filter_power=0.0, normalize=True):
    """Gaussian bump in ``w`` with ``v = 0``, optionally filtered and scaled to ``E = 1``."""
    w = gaussian_bump(grid, center, width).astype(complex)
    if filter_power:
        w = spectral_filter(w, grid, filter_power)
    state = WaveState(grid, w, np.zeros(grid.shape, complex), s)
    if normalize:
        state = state.scaled(1.0 / energy(state))
    return state


# --------------------------------------------------------------- snapshots

_HEADER = struct.Struct("<4d")


def write_snapshot(path, state: WaveState, every: int = 1) -> None:
    """Write ``w`` downsampled by ``every`` along each axis."""
    if state.grid.N % every:
        raise ValueError("downsampling factor must divide N")
    sl = (slice(None, None, every),) * state.grid.d
    w = np.ascontiguousarray(state.w[sl], dtype="<c16")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(state.grid.d, state.grid.N // every, state.grid.L, state.t))
        fh.write(w.tobytes(order="C"))


def read_snapshot(path):
    """Return ``(grid, t, w)`` from a file written by :func:`write_snapshot`."""
    with open(path, "rb") as fh:
        raw = fh.read()
    d, n, L, t = _HEADER.unpack_from(raw)
    d, n = int(d), int(n)
    w = np.frombuffer(raw, dtype="<c16", offset=_HEADER.size)
    if w.size != n**d:
        raise ValueError(f"snapshot holds {w.size} values, header says {n}^{d}")
    return TorusGrid(d, L, n), t, w.reshape((n,) * d)

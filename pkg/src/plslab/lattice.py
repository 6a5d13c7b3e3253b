"""Periodic grids, unitary DFTs and Fourier multipliers.

Every transform in the package goes through :func:`forward_transform` and
:func:`inverse_transform`, which use the orthonormal ("ortho") DFT
normalization.  With that choice the discrete L2 norm of a field is the
plain Euclidean norm of its samples, and it equals the Euclidean norm of its
Fourier coefficients.  No cell-volume factor ``h**d`` is ever applied, so all
constants computed downstream are ratios of such norms.

Frequency arrays are stored in the native FFT ordering (index ``k`` along an
axis corresponds to the integer frequency ``m = k`` for ``k < N/2`` and
``m = k - N`` otherwise), which is what :func:`numpy.fft.fftfreq` produces.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft

from .errors import ShapeError

__all__ = [
    "TorusGrid",
    "BandField",
    "FractionalSymbol",
    "forward_transform",
    "inverse_transform",
    "band_project",
    "apply_symbol",
    "sobolev_norm",
    "l2_norm",
    "fft_workers",
]


def fft_workers() -> int:
    """Thread count for the FFT backend, read from ``PLSLAB_THREADS``."""
    try:
        return max(1, int(os.environ.get("PLSLAB_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class TorusGrid:
    """Uniform grid on the torus ``[0, L)^d`` with ``N`` points per side.

    Parameters
    ----------
    d : int
        Dimension, 1, 2 or 3.
    L : float
        Side length.
    N : int
        Points per side; a power of two, at least 8.
    """

    d: int
    L: float
    N: int

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {self.d}")
        if not self.L > 0:
            raise ValueError(f"side length must be positive, got {self.L}")
        n = int(self.N)
        if n != self.N or n < 8 or n & (n - 1):
            raise ValueError(f"N must be a power of two >= 8, got {self.N}")
        object.__setattr__(self, "N", n)
        object.__setattr__(self, "L", float(self.L))

    @property
    def h(self) -> float:
        return self.L / self.N

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.d

    @property
    def size(self) -> int:
        return self.N**self.d

    @property
    def dxi(self) -> float:
        """Spacing of the frequency lattice, ``2*pi/L``."""
        return 2 * np.pi / self.L

    @property
    def nyquist(self) -> float:
        """Largest representable physical frequency along an axis."""
        return self.dxi * (self.N // 2)

    @cached_property
    def axis_nodes(self) -> np.ndarray:
        return self.h * np.arange(self.N)

    @cached_property
    def axis_modes(self) -> np.ndarray:
        """Integer frequencies along one axis in FFT order."""
        return np.fft.fftfreq(self.N, d=1.0 / self.N).astype(int)

    @cached_property
    def nodes(self) -> np.ndarray:
        """Spatial nodes, shape ``(N,)*d + (d,)``."""
        return np.stack(np.meshgrid(*([self.axis_nodes] * self.d), indexing="ij"), axis=-1)

    @cached_property
    def modes(self) -> np.ndarray:
        """Integer frequency vectors ``m``, shape ``(N,)*d + (d,)``."""
        return np.stack(np.meshgrid(*([self.axis_modes] * self.d), indexing="ij"), axis=-1)

    @cached_property
    def xi(self) -> np.ndarray:
        """Physical frequencies ``(2*pi/L) m``, shape ``(N,)*d + (d,)``."""
        return self.dxi * self.modes

    @cached_property
    def xi2(self) -> np.ndarray:
        """``|xi|^2`` over the lattice."""
        return np.sum(self.xi**2, axis=-1)

    def flat_index(self, m) -> int:
        """Position of the integer frequency ``m`` in a raveled frequency array."""
        m = np.atleast_1d(np.asarray(m, dtype=int))
        if m.shape != (self.d,):
            raise ShapeError(f"frequency vector must have length {self.d}")
        if np.any(m < -self.N // 2) or np.any(m >= self.N // 2):
            raise ValueError(f"frequency {m.tolist()} outside the lattice")
        return int(np.ravel_multi_index(tuple(m % self.N), self.shape))

    def plane_wave(self, m) -> np.ndarray:
        """Unit-norm exponential ``exp(i xi_m . x)`` sampled on the nodes."""
        xi = self.dxi * np.asarray(m, dtype=float)
        phase = self.nodes @ xi
        return np.exp(1j * phase) / np.sqrt(self.size)

    def check(self, arr: np.ndarray, what: str = "field") -> np.ndarray:
        arr = np.asarray(arr)
        if arr.shape != self.shape:
            raise ShapeError(f"{what} has shape {arr.shape}, grid expects {self.shape}")
        return arr

    def to_dict(self) -> dict:
        return {"d": self.d, "L": self.L, "N": self.N}


def forward_transform(u: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Unitary DFT of a field sampled on ``grid``."""
    u = grid.check(u)
    return scipy.fft.fftn(u, norm="ortho", workers=fft_workers())


def inverse_transform(uhat: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Inverse of :func:`forward_transform`."""
    uhat = grid.check(uhat, "coefficient array")
    return scipy.fft.ifftn(uhat, norm="ortho", workers=fft_workers())


def l2_norm(u: np.ndarray) -> float:
    return float(np.linalg.norm(np.ravel(u)))


@dataclass(frozen=True)
class FractionalSymbol:
    """The multiplier ``(|xi|^2 + 1)^(s/2)`` on the lattice of ``grid``."""

    grid: TorusGrid
    s: float
    values: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.s > 0:
            raise ValueError(f"fractional order must be positive, got {self.s}")
        object.__setattr__(self, "values", (self.grid.xi2 + 1.0) ** (self.s / 2))

    def power(self, p: float) -> np.ndarray:
        # exponent arithmetic on (|xi|^2+1) keeps a+b composition exact-ish
        return (self.grid.xi2 + 1.0) ** (self.s * p / 2)


def apply_symbol(u: np.ndarray, symbol: FractionalSymbol, power: float = 1.0) -> np.ndarray:
    """Multiply every Fourier coefficient of ``u`` by ``sigma_m ** power``."""
    grid = symbol.grid
    if power == 0:
        return np.array(grid.check(u), dtype=complex)
    uhat = forward_transform(u, grid)
    return inverse_transform(uhat * symbol.power(power), grid)


def sobolev_norm(u: np.ndarray, grid: TorusGrid, r: float) -> float:
    """``(sum_m (|xi_m|^2+1)^r |u_hat_m|^2)^(1/2)`` with unitary coefficients."""
    uhat = forward_transform(u, grid)
    if r == 0:
        return l2_norm(uhat)
    weight = (grid.xi2 + 1.0) ** r
    return float(np.sqrt(np.sum(weight * np.abs(uhat) ** 2)))


@dataclass
class BandField:
    """A field together with the frequency set it is declared to live in.

    Constructing one checks that projecting ``values`` onto ``mask`` changes
    nothing (relative ``1e-12`` in L2); use :meth:`from_coefficients` or
    :func:`band_project` to build fields that are band limited by design.
    """

    grid: TorusGrid
    values: np.ndarray
    mask: np.ndarray
    rtol: float = 1e-12

    def __post_init__(self):
        self.values = np.asarray(self.grid.check(self.values), dtype=complex)
        self.mask = np.asarray(self.grid.check(self.mask, "mask"), dtype=bool)
        uhat = forward_transform(self.values, self.grid)
        leak = l2_norm(uhat[~self.mask])
        total = l2_norm(uhat)
        if leak > self.rtol * max(total, np.finfo(float).tiny):
            raise ValueError(f"field leaks outside its band: relative {leak / total:.3e}")

    @classmethod
    def from_coefficients(cls, grid: TorusGrid, coeffs: np.ndarray, mask: np.ndarray) -> "BandField":
        """Field whose Fourier coefficients on ``mask`` are ``coeffs`` (in mask order)."""
        mask = np.asarray(grid.check(mask, "mask"), dtype=bool)
        uhat = np.zeros(grid.shape, dtype=complex)
        uhat[mask] = coeffs
        return cls(grid, inverse_transform(uhat, grid), mask)

    def coefficients(self) -> np.ndarray:
        return forward_transform(self.values, self.grid)[self.mask]

    def norm(self) -> float:
        return l2_norm(self.values)


def band_project(u, mask: np.ndarray, grid: TorusGrid | None = None):
    """Orthogonal projection onto the frequencies selected by ``mask``.

    Accepts either a :class:`BandField` (returns a :class:`BandField` with the
    new mask) or a raw spatial array together with ``grid``.
    """
    if isinstance(u, BandField):
        grid, values = u.grid, u.values
    else:
        if grid is None:
            raise TypeError("grid is required when projecting a raw array")
        values = u
    mask = np.asarray(grid.check(mask, "mask"), dtype=bool)
    uhat = forward_transform(values, grid)
    uhat[~mask] = 0
    out = inverse_transform(uhat, grid)
    if isinstance(u, BandField):
        return BandField(grid, out, mask)
    return out

"""Periodic scalar fields on the unit torus [0, 1)^2.

A field stores ``n x n`` float64 samples with ``values[j, k] = f(j/n, k/n)``:
the first array axis is ``x``, the second is ``y``. All operators treat
indices modulo ``n``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy import fft as sfft

from .errors import GridMismatch, InvalidField, NonPositiveField

SCHEMES = ("spectral", "stencil5")


@dataclass(frozen=True)
class GridSpec:
    n: int

    def __post_init__(self):
        n = self.n
        if not isinstance(n, (int, np.integer)) or isinstance(n, bool):
            raise InvalidField(f"grid resolution must be an integer, got {n!r}")
        if n < 8 or n & (n - 1):
            raise InvalidField(f"grid resolution must be a power of two >= 8, got {n}")
        object.__setattr__(self, "n", int(n))

    @property
    def h(self) -> float:
        return 1.0 / self.n

    def coords(self) -> np.ndarray:
        """1-D node coordinates ``j / n``."""
        return np.arange(self.n) / self.n

    def mesh(self) -> Tuple[np.ndarray, np.ndarray]:
        x = self.coords()
        return np.meshgrid(x, x, indexing="ij")


class ScalarField:
    """Immutable periodic samples on a :class:`GridSpec`."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: GridSpec, values):
        arr = np.array(values, dtype=np.float64, copy=True)
        if arr.shape != (grid.n, grid.n):
            raise InvalidField(f"expected shape {(grid.n, grid.n)}, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InvalidField("field contains non-finite samples")
        arr.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", arr)

    def __setattr__(self, name, value):
        raise AttributeError("ScalarField is immutable")

    @classmethod
    def constant(cls, grid: GridSpec, c: float) -> "ScalarField":
        return cls(grid, np.full((grid.n, grid.n), float(c)))

    @classmethod
    def from_function(cls, grid: GridSpec, func) -> "ScalarField":
        x, y = grid.mesh()
        return cls(grid, np.broadcast_to(func(x, y), x.shape))

    @property
    def n(self) -> int:
        return self.grid.n

    def min(self) -> float:
        return float(self.values.min())

    def max(self) -> float:
        return float(self.values.max())

    def translate(self, a: int, b: int) -> "ScalarField":
        """Shift by ``(a, b)`` grid indices: ``out[j, k] = f[j - a, k - b]``."""
        return ScalarField(self.grid, np.roll(self.values, (a, b), axis=(0, 1)))

    def __repr__(self):
        return f"ScalarField(n={self.n}, min={self.min():.6g}, max={self.max():.6g})"


def _check_same_grid(f: ScalarField, g: ScalarField):
    if f.grid != g.grid:
        raise GridMismatch(f"grid n={f.n} does not match grid n={g.n}")


def wavenumbers(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Angular wavenumbers for a full-x, half-y real transform layout."""
    kx = 2.0 * np.pi * sfft.fftfreq(n, d=1.0 / n)
    ky = 2.0 * np.pi * sfft.rfftfreq(n, d=1.0 / n)
    return kx[:, None], ky[None, :]


def spectral_symbol(n: int) -> np.ndarray:
    """Fourier multiplier of the spectral Laplacian, shape ``(n, n//2 + 1)``."""
    kx, ky = wavenumbers(n)
    return -(kx**2 + ky**2)


def stencil5_symbol(n: int) -> np.ndarray:
    """Fourier multiplier of the periodic 5-point Laplacian."""
    h = 1.0 / n
    kx, ky = wavenumbers(n)
    return -(2.0 / h**2) * ((1.0 - np.cos(kx * h)) + (1.0 - np.cos(ky * h)))


def _spectral_laplacian(a: np.ndarray) -> np.ndarray:
    n = a.shape[0]
    return sfft.irfft2(spectral_symbol(n) * sfft.rfft2(a), s=a.shape)


def _stencil5_laplacian(a: np.ndarray) -> np.ndarray:
    n = a.shape[0]
    out = np.empty_like(a)
    out[1:-1] = a[:-2] + a[2:]
    out[0] = a[-1] + a[1]
    out[-1] = a[-2] + a[0]
    t = np.empty_like(a)
    t[:, 1:-1] = a[:, :-2] + a[:, 2:]
    t[:, 0] = a[:, -1] + a[:, 1]
    t[:, -1] = a[:, -2] + a[:, 0]
    out += t
    out -= 4.0 * a
    out *= float(n * n)
    return out


def laplacian_array(a: np.ndarray, scheme: str = "spectral") -> np.ndarray:
    """Array-level Laplacian used by the time steppers (no validation)."""
    if scheme == "spectral":
        return _spectral_laplacian(a)
    if scheme == "stencil5":
        return _stencil5_laplacian(a)
    raise ValueError(f"unknown laplacian scheme {scheme!r}; expected one of {SCHEMES}")


def laplacian(f: ScalarField, scheme: str = "spectral") -> ScalarField:
    """Flat-torus Laplacian of ``f``.

    ``spectral`` is exact on trigonometric polynomials below the Nyquist
    frequency; ``stencil5`` is the second-order 5-point stencil with
    periodic wraparound.
    """
    return ScalarField(f.grid, laplacian_array(f.values, scheme))


def gradient(f: ScalarField) -> Tuple[ScalarField, ScalarField]:
    """Spectral first derivatives ``(df/dx, df/dy)``; Nyquist modes dropped."""
    n = f.n
    kx, ky = wavenumbers(n)
    kx = np.where(np.abs(kx) >= np.pi * n - 1e-9, 0.0, kx)
    ky = np.where(np.abs(ky) >= np.pi * n - 1e-9, 0.0, ky)
    F = sfft.rfft2(f.values)
    fx = sfft.irfft2(1j * kx * F, s=f.values.shape)
    fy = sfft.irfft2(1j * ky * F, s=f.values.shape)
    return ScalarField(f.grid, fx), ScalarField(f.grid, fy)


def hessian(f: ScalarField) -> Tuple[ScalarField, ScalarField, ScalarField]:
    """Spectral second derivatives ``(f_xx, f_xy, f_yy)``."""
    n = f.n
    kx, ky = wavenumbers(n)
    kxo = np.where(np.abs(kx) >= np.pi * n - 1e-9, 0.0, kx)
    kyo = np.where(np.abs(ky) >= np.pi * n - 1e-9, 0.0, ky)
    F = sfft.rfft2(f.values)
    s = f.values.shape
    fxx = sfft.irfft2(-(kx**2) * F, s=s)
    fxy = sfft.irfft2(-(kxo * kyo) * F, s=s)
    fyy = sfft.irfft2(-(ky**2) * F, s=s)
    return ScalarField(f.grid, fxx), ScalarField(f.grid, fxy), ScalarField(f.grid, fyy)


def integrate(f: ScalarField) -> float:
    """Periodic trapezoid rule ``h^2 * sum(samples)``.

    Rows are summed first, then the row sums, so the reduction order is
    fixed by the array shape alone.
    """
    h = f.grid.h
    return float(np.sum(np.sum(f.values, axis=1)) * (h * h))


def norms(f: ScalarField, g: ScalarField) -> Tuple[float, float]:
    """Return ``(L1, sup)`` norms of ``f - g`` against the flat measure."""
    _check_same_grid(f, g)
    d = np.abs(f.values - g.values)
    return integrate(ScalarField(f.grid, d)), float(d.max())


def exp_scale(v: ScalarField, c: float) -> ScalarField:
    """Sample-wise ``exp(c * v)``; ``c = 2`` maps an exponent to its factor."""
    return ScalarField(v.grid, np.exp(c * v.values))


def log_scale(u: ScalarField, c: float = 0.5) -> ScalarField:
    """Sample-wise ``c * log(u)``; the default recovers ``v`` from ``u = e^{2v}``."""
    if u.min() <= 0.0:
        raise NonPositiveField(f"log requires a positive field, min sample is {u.min():g}")
    return ScalarField(u.grid, c * np.log(u.values))


def fourier_amplitude(f: ScalarField, kx: int, ky: int) -> float:
    """Cosine amplitude of the real Fourier mode ``(kx, ky)``.

    For ``f = A cos(2 pi (kx x + ky y)) + ...`` this returns ``A``.
    """
    F = np.fft.fft2(f.values) / f.n**2
    c = F[kx % f.n, ky % f.n]
    return float(2.0 * abs(c)) if (kx, ky) != (0, 0) else float(c.real)

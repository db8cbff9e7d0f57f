"""Periodic grids, sampled fields and pseudo-spectral operators.

Everything downstream (solvers, decomposition, residuals) differentiates
through these helpers, so the conventions are fixed here once:

* grids are uniform and periodic in every axis, spacing = length / points;
* wavenumbers are the DFT wavenumbers k_j = 2*pi*m_j/L_j with m_j in the
  signed Nyquist range (numpy fftfreq ordering);
* odd-order derivatives zero the Nyquist mode (the standard antisymmetry
  fix), even-order derivatives keep it;
* real-to-real derivatives go through the complex DFT and take the real
  part at the end.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "Grid",
    "RealField",
    "ComplexField",
    "grid_create",
    "real_field",
    "complex_field",
    "gradient",
    "laplacian",
    "divergence",
    "volume_integral",
]


@dataclass(frozen=True)
class Grid:
    """Uniform periodic rectilinear grid in 1 or 2 dimensions."""

    shape: tuple[int, ...]
    lengths: tuple[float, ...]

    def __post_init__(self):
        if len(self.shape) not in (1, 2):
            raise ValueError(f"grid must be 1D or 2D, got {len(self.shape)} axes")
        if len(self.shape) != len(self.lengths):
            raise ValueError("points and lengths must have one entry per axis")
        if any(int(n) != n or n < 8 for n in self.shape):
            raise ValueError(f"need at least 8 points per axis, got {self.shape}")
        if any(length <= 0 for length in self.lengths):
            raise ValueError(f"axis lengths must be positive, got {self.lengths}")

    @property
    def dims(self) -> int:
        return len(self.shape)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(length / n for n, length in zip(self.shape, self.lengths))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def npoints(self) -> int:
        return int(np.prod(self.shape))

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, ...]:
        """Per-axis DFT wavenumbers 2*pi*m/L in fft ordering."""
        return tuple(
            2.0 * np.pi * np.fft.fftfreq(n, d=dx)
            for n, dx in zip(self.shape, self.spacing)
        )

    @cached_property
    def axes(self) -> tuple[np.ndarray, ...]:
        """Per-axis coordinates, origin at 0, endpoint excluded."""
        return tuple(
            np.arange(n) * dx for n, dx in zip(self.shape, self.spacing)
        )

    def meshes(self) -> tuple[np.ndarray, ...]:
        """Coordinate arrays broadcastable to ``shape``."""
        return tuple(np.meshgrid(*self.axes, indexing="ij", sparse=True))

    @cached_property
    def _k_broadcast(self) -> tuple[np.ndarray, ...]:
        ks = []
        for axis, k in enumerate(self.wavenumbers):
            sh = [1] * self.dims
            sh[axis] = self.shape[axis]
            ks.append(k.reshape(sh))
        return tuple(ks)

    @cached_property
    def _k_odd(self) -> tuple[np.ndarray, ...]:
        # Nyquist mode zeroed for odd-order derivatives.
        ks = []
        for axis, k in enumerate(self._k_broadcast):
            k = k.copy()
            n = self.shape[axis]
            if n % 2 == 0:
                k[(slice(None),) * axis + (n // 2,)] = 0.0
            ks.append(k)
        return tuple(ks)

    @cached_property
    def k_squared(self) -> np.ndarray:
        out = np.zeros(self.shape)
        for k in self._k_broadcast:
            out = out + k**2
        return out


@dataclass(frozen=True)
class RealField:
    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise ValueError(
                f"field shape {self.values.shape} != grid shape {self.grid.shape}"
            )


@dataclass(frozen=True)
class ComplexField:
    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise ValueError(
                f"field shape {self.values.shape} != grid shape {self.grid.shape}"
            )


def grid_create(dims: int, points_per_axis, length_per_axis) -> Grid:
    """Build a periodic grid; scalars are broadcast to every axis."""
    if dims not in (1, 2):
        raise ValueError(f"dims must be 1 or 2, got {dims}")
    pts = (points_per_axis,) * dims if np.isscalar(points_per_axis) else tuple(points_per_axis)
    lens = (length_per_axis,) * dims if np.isscalar(length_per_axis) else tuple(length_per_axis)
    if len(pts) != dims or len(lens) != dims:
        raise ValueError("points/lengths do not match dims")
    return Grid(shape=tuple(int(p) for p in pts), lengths=tuple(float(L) for L in lens))


def real_field(grid: Grid, values, allow_nan: bool = False) -> RealField:
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 0:
        arr = np.full(grid.shape, float(arr))
    if not allow_nan and not np.all(np.isfinite(arr)):
        raise ValueError("real field contains non-finite values")
    return RealField(grid, arr)


def complex_field(grid: Grid, values) -> ComplexField:
    arr = np.asarray(values, dtype=complex)
    if arr.ndim == 0:
        arr = np.full(grid.shape, complex(arr))
    if not np.all(np.isfinite(arr)):
        raise ValueError("complex field contains non-finite values")
    return ComplexField(grid, arr)


# -- spectral derivative kernels on raw arrays (used heavily by the solvers) --

def grad_arr(grid: Grid, values: np.ndarray) -> tuple[np.ndarray, ...]:
    """Spectral gradient, one array per axis; exact for band-limited data."""
    vhat = np.fft.fftn(values)
    out = tuple(np.fft.ifftn(1j * k * vhat) for k in grid._k_odd)
    if not np.iscomplexobj(values):
        out = tuple(g.real for g in out)
    return out


def lap_arr(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Spectral Laplacian: ifft(-|k|^2 fft(f))."""
    out = np.fft.ifftn(-grid.k_squared * np.fft.fftn(values))
    return out if np.iscomplexobj(values) else out.real


def div_arr(grid: Grid, components: tuple[np.ndarray, ...]) -> np.ndarray:
    """Spectral divergence of a vector of arrays."""
    if len(components) != grid.dims:
        raise ValueError("one component per axis required")
    out = np.zeros(grid.shape, dtype=complex)
    for k, comp in zip(grid._k_odd, components):
        out = out + 1j * k * np.fft.fftn(comp)
    out = np.fft.ifftn(out)
    return out if any(np.iscomplexobj(c) for c in components) else out.real


def _same_kind(f, values: np.ndarray):
    if isinstance(f, ComplexField):
        return ComplexField(f.grid, values)
    return RealField(f.grid, values)


def gradient(f: RealField | ComplexField):
    """Gradient of a sampled field, component j = ifft(i k_j fft(f))."""
    return tuple(_same_kind(f, g) for g in grad_arr(f.grid, f.values))


def laplacian(f: RealField | ComplexField):
    return _same_kind(f, lap_arr(f.grid, f.values))


def divergence(components) -> RealField | ComplexField:
    grids = {c.grid.shape for c in components}
    if len(grids) != 1:
        raise ValueError("all components must share a grid")
    grid = components[0].grid
    vals = div_arr(grid, tuple(c.values for c in components))
    return _same_kind(components[0], vals)


def volume_integral(f: RealField, mask: np.ndarray | None = None) -> float:
    """Sum of samples times cell volume; masked points are excluded."""
    vals = f.values if mask is None else f.values[~mask]
    return float(np.sum(vals) * f.grid.cell_volume)

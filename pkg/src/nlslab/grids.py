"""Periodic uniform grids, complex fields, spectral calculus, quadrature.

Everything downstream (solver, linear operators, fits) runs on these grids.
Boundary conditions are periodic; callers are responsible for keeping
localized states far enough from the boundary (scenario validation enforces
a ten e-folding-length margin).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

SNAPSHOT_MAGIC = b"NLSF"
SNAPSHOT_VERSION = 1


class GridError(ValueError):
    pass


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on [-length/2, length/2) per axis."""

    dim: int
    n: int
    length: float

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise GridError(f"dim must be 1 or 2, got {self.dim}")
        if not _is_power_of_two(self.n) or self.n < 16:
            raise GridError(f"n must be a power of two >= 16, got {self.n}")
        if not self.length > 0:
            raise GridError(f"length must be positive, got {self.length}")

    @property
    def dx(self) -> float:
        return self.length / self.n

    @property
    def npoints(self) -> int:
        return self.n**self.dim

    @cached_property
    def x(self) -> np.ndarray:
        """1D axis coordinates, -L/2 .. L/2 - dx."""
        return -0.5 * self.length + self.dx * np.arange(self.n)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Per-axis frequencies 2*pi*k/L, FFT ordering, k in {-n/2..n/2-1}."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dx)

    @cached_property
    def meshgrid(self) -> tuple[np.ndarray, ...]:
        if self.dim == 1:
            return (self.x,)
        return tuple(np.meshgrid(self.x, self.x, indexing="ij"))

    @cached_property
    def lap_multiplier(self) -> np.ndarray:
        """Fourier multiplier of the Laplacian, -|k|^2."""
        k2 = self.wavenumbers**2
        if self.dim == 1:
            return -k2
        return -(k2[:, None] + k2[None, :])

    @cached_property
    def deriv_multiplier(self) -> np.ndarray:
        """Fourier multiplier i*k of d/dx with the Nyquist mode zeroed."""
        k = self.wavenumbers.copy()
        k[self.n // 2] = 0.0
        return 1j * k

    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim


def make_grid(n: int, length: float, dim: int = 1) -> Grid:
    return Grid(dim=dim, n=n, length=float(length))


@dataclass
class Field:
    """Complex samples of a function on a Grid."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.complex128)
        if v.shape != self.grid.shape():
            raise GridError(
                f"value shape {v.shape} does not match grid shape {self.grid.shape()}"
            )
        self.values = v

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy())


def field_from(grid: Grid, values: np.ndarray) -> Field:
    return Field(grid, values)


def _fft(v: np.ndarray) -> np.ndarray:
    return np.fft.fftn(v)


def _ifft(v: np.ndarray) -> np.ndarray:
    return np.fft.ifftn(v)


def spectral_laplacian(f: Field) -> Field:
    """Second derivative (1D) / Laplacian (2D) of the trigonometric interpolant."""
    out = _ifft(f.grid.lap_multiplier * _fft(f.values))
    return Field(f.grid, out)


def spectral_derivative(f: Field, axis: int = 0) -> Field:
    """First derivative along one axis, Nyquist mode zeroed."""
    vhat = _fft(f.values)
    mult = f.grid.deriv_multiplier
    if f.grid.dim == 1:
        vhat *= mult
    elif axis == 0:
        vhat *= mult[:, None]
    else:
        vhat *= mult[None, :]
    return Field(f.grid, _ifft(vhat))


def laplacian_values(grid: Grid, values: np.ndarray) -> np.ndarray:
    return _ifft(grid.lap_multiplier * _fft(values))


def derivative_values(grid: Grid, values: np.ndarray, axis: int = 0) -> np.ndarray:
    vhat = _fft(values)
    mult = grid.deriv_multiplier
    if grid.dim == 1:
        vhat *= mult
    elif axis == 0:
        vhat *= mult[:, None]
    else:
        vhat *= mult[None, :]
    return _ifft(vhat)


def integrate(f: Field | np.ndarray, grid: Grid | None = None):
    """dx^dim * sum of samples; spectrally accurate for decayed integrands."""
    if isinstance(f, Field):
        grid, v = f.grid, f.values
    else:
        if grid is None:
            raise GridError("integrate of a bare array needs a grid")
        v = f
    val = v.sum() * grid.dx**grid.dim
    if np.iscomplexobj(v) and abs(val.imag) < 1e-13 * (abs(val.real) + 1.0):
        pass
    return val


def inner(a: np.ndarray, b: np.ndarray, grid: Grid) -> float:
    """Real L2 inner product of real arrays."""
    return float(np.sum(a * b) * grid.dx**grid.dim)


def l2_norm(f: Field | np.ndarray, grid: Grid | None = None) -> float:
    if isinstance(f, Field):
        grid, v = f.grid, f.values
    else:
        v = f
    return float(np.sqrt(np.sum(np.abs(v) ** 2) * grid.dx**grid.dim))


def h1_norm(f: Field) -> float:
    """Sobolev norm: (||f||_2^2 + ||grad f||_2^2)^(1/2), derivative spectral."""
    total = np.sum(np.abs(f.values) ** 2)
    if f.grid.dim == 1:
        total += np.sum(np.abs(spectral_derivative(f).values) ** 2)
    else:
        total += np.sum(np.abs(spectral_derivative(f, 0).values) ** 2)
        total += np.sum(np.abs(spectral_derivative(f, 1).values) ** 2)
    return float(np.sqrt(total * f.grid.dx**f.grid.dim))


def write_snapshot(path, f: Field) -> None:
    """Binary field snapshot: NLSF header + interleaved little-endian (re, im)."""
    g = f.grid
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(struct.pack("<III", SNAPSHOT_VERSION, g.dim, g.n))
        for _ in range(g.dim):
            fh.write(struct.pack("<d", g.length))
        inter = np.empty(g.npoints * 2, dtype="<f8")
        flat = f.values.reshape(-1)
        inter[0::2] = flat.real
        inter[1::2] = flat.imag
        fh.write(inter.tobytes())


def read_snapshot(path) -> Field:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != SNAPSHOT_MAGIC:
            raise GridError(f"bad snapshot magic {magic!r}")
        version, dim, n = struct.unpack("<III", fh.read(12))
        if version != SNAPSHOT_VERSION:
            raise GridError(f"unsupported snapshot version {version}")
        lengths = struct.unpack("<" + "d" * dim, fh.read(8 * dim))
        grid = Grid(dim=dim, n=n, length=lengths[0])
        raw = np.frombuffer(fh.read(grid.npoints * 16), dtype="<f8")
    values = (raw[0::2] + 1j * raw[1::2]).reshape(grid.shape())
    return Field(grid, values)

"""Periodic lattice discretization of R^d.

Fields live on a uniform periodic grid.  The discrete transform is weighted
by the cell volume so that frequency-space samples approximate the continuum
transform ``F f(xi) = int f(x) exp(-i xi.x) dx`` and multipliers are sampled
at the lattice frequencies ``xi_k = 2 pi k / Omega``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

REAL = "real"
FREQ = "freq"


class TagMismatch(ValueError):
    """Operation applied to a field in the wrong space."""


class GridMismatch(ValueError):
    """Two operands live on different grids."""


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid.

    ``origin`` is the coordinate of sample 0 along each axis; by default the
    box is centred at 0, i.e. ``[-Omega/2, Omega/2)``.
    """

    shape: tuple[int, ...]
    extent: tuple[float, ...]
    origin: tuple[float, ...] | None = None

    def __post_init__(self):
        shape = tuple(int(n) for n in self.shape)
        extent = tuple(float(e) for e in self.extent)
        if len(shape) != len(extent) or not shape:
            raise ValueError("shape and extent must have the same nonzero length")
        for n in shape:
            if n < 8 or n % 2:
                raise ValueError(f"points per axis must be even and >= 8, got {n}")
        for e in extent:
            if not e > 0:
                raise ValueError(f"extent must be positive, got {e}")
        origin = self.origin
        if origin is None:
            origin = tuple(-e / 2 for e in extent)
        origin = tuple(float(o) for o in origin)
        if len(origin) != len(shape):
            raise ValueError("origin has wrong length")
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "extent", extent)
        object.__setattr__(self, "origin", origin)

    @classmethod
    def uniform(cls, d: int, n: int, extent: float) -> "Grid":
        return cls((n,) * d, (extent,) * d)

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def size(self) -> int:
        return math.prod(self.shape)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(e / n for e, n in zip(self.extent, self.shape))

    @property
    def cell_volume(self) -> float:
        return math.prod(self.spacing)

    @property
    def volume(self) -> float:
        return math.prod(self.extent)

    @property
    def freq_spacing(self) -> tuple[float, ...]:
        return tuple(2 * np.pi / e for e in self.extent)

    @property
    def freq_cell_volume(self) -> float:
        return math.prod(self.freq_spacing)

    def axes(self) -> list[np.ndarray]:
        """1D coordinate arrays, one per axis."""
        return [o + h * np.arange(n) for o, h, n in zip(self.origin, self.spacing, self.shape)]

    def freq_axes(self) -> list[np.ndarray]:
        """1D lattice frequencies per axis, in FFT storage order."""
        return [2 * np.pi * np.fft.fftfreq(n, d=e / n) for n, e in zip(self.shape, self.extent)]

    @cached_property
    def coords(self) -> np.ndarray:
        """Coordinates with shape ``shape + (d,)``."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    @cached_property
    def freqs(self) -> np.ndarray:
        """Frequency vectors with shape ``shape + (d,)``."""
        return np.stack(np.meshgrid(*self.freq_axes(), indexing="ij"), axis=-1)

    @cached_property
    def freq_norm(self) -> np.ndarray:
        return np.sqrt(np.sum(self.freqs**2, axis=-1))

    @cached_property
    def nyquist_mask(self) -> np.ndarray:
        """Shape ``shape + (d,)``; True where that axis sits on its unpaired Nyquist index."""
        masks = []
        for n in self.shape:
            m = np.zeros(n, dtype=bool)
            m[n // 2] = True
            masks.append(m)
        return np.stack(np.meshgrid(*masks, indexing="ij"), axis=-1)

    @cached_property
    def _phase(self) -> np.ndarray:
        # exp(-i xi.origin) so that the discrete transform uses true coordinates
        return np.exp(-1j * (self.freqs @ np.asarray(self.origin)))

    def zeros(self, space: str = REAL) -> "Field":
        return Field(self, np.zeros(self.shape, dtype=complex), space)

    def field(self, values, space: str = REAL) -> "Field":
        return Field(self, np.asarray(values, dtype=complex).reshape(self.shape), space)

    def sample(self, fn) -> "Field":
        """Field from a callable taking coordinate arrays ``x0, x1, ...``."""
        xs = np.meshgrid(*self.axes(), indexing="ij")
        return self.field(np.broadcast_to(fn(*xs), self.shape))


@dataclass
class Field:
    grid: Grid
    values: np.ndarray
    space: str = REAL

    def __post_init__(self):
        if self.space not in (REAL, FREQ):
            raise ValueError(f"unknown space tag {self.space!r}")
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != self.grid.shape:
            raise ValueError(f"values shape {self.values.shape} != grid shape {self.grid.shape}")

    def _check(self, other: "Field"):
        if other.grid != self.grid:
            raise GridMismatch("fields live on different grids")
        if other.space != self.space:
            raise TagMismatch("fields live in different spaces")

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy(), self.space)

    def with_values(self, values) -> "Field":
        return Field(self.grid, values, self.space)

    def __add__(self, other: "Field") -> "Field":
        self._check(other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        self._check(other)
        return self.with_values(self.values - other.values)

    def __mul__(self, scalar) -> "Field":
        return self.with_values(self.values * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "Field":
        return self.with_values(-self.values)

    def __truediv__(self, scalar) -> "Field":
        return self.with_values(self.values / scalar)


def dft(f: Field) -> Field:
    """Cell-volume weighted forward transform; result is in frequency space."""
    if f.space != REAL:
        raise TagMismatch("dft expects a real-space field")
    g = f.grid
    return Field(g, g.cell_volume * g._phase * np.fft.fftn(f.values), FREQ)


def idft(f: Field) -> Field:
    """Exact inverse of :func:`dft`."""
    if f.space != FREQ:
        raise TagMismatch("idft expects a frequency-space field")
    g = f.grid
    return Field(g, np.fft.ifftn(f.values / g._phase) / g.cell_volume, REAL)


def apply_multiplier(f: Field, multiplier: np.ndarray) -> Field:
    """``idft(multiplier * dft(f))`` for a real-space field."""
    if f.space != REAL:
        raise TagMismatch("multiplier expects a real-space field")
    # phase and cell-volume factors cancel
    return Field(f.grid, np.fft.ifftn(multiplier * np.fft.fftn(f.values)), REAL)


def lp_norm(f: Field, p: float = 2.0) -> float:
    """Riemann-sum L_p norm; ``p = inf`` gives the sup norm."""
    if f.space != REAL:
        raise TagMismatch("lp_norm expects a real-space field")
    a = np.abs(f.values)
    if math.isinf(p):
        return float(a.max(initial=0.0))
    if p < 1:
        raise ValueError("p must be >= 1")
    return float((f.grid.cell_volume * np.sum(a**p)) ** (1.0 / p))


def spectral_l2_norm(f: Field) -> float:
    """Plancherel side: ``((2 pi)^-d dxi sum |f_hat|^2)^(1/2)``."""
    if f.space != FREQ:
        raise TagMismatch("spectral_l2_norm expects a frequency-space field")
    g = f.grid
    s = g.freq_cell_volume / (2 * np.pi) ** g.dim * np.sum(np.abs(f.values) ** 2)
    return float(np.sqrt(s))


def restrict(f: Field, indicator) -> Field:
    """Pointwise product with a 0/1 indicator (array or Field)."""
    if isinstance(indicator, Field):
        if indicator.grid != f.grid:
            raise GridMismatch("indicator lives on a different grid")
        mask = indicator.values.real
    else:
        mask = np.asarray(indicator)
        if mask.shape != f.grid.shape:
            raise GridMismatch(f"indicator shape {mask.shape} != grid shape {f.grid.shape}")
    return f.with_values(f.values * mask)


def pairing(f: Field, g: Field) -> complex:
    """Bilinear pairing ``int f g dx`` (no conjugation)."""
    f._check(g)
    return complex(f.grid.cell_volume * np.sum(f.values * g.values))


def inner(f: Field, g: Field) -> complex:
    """Hilbert inner product ``int f conj(g) dx``."""
    f._check(g)
    return complex(f.grid.cell_volume * np.vdot(g.values, f.values))


def convolve(k: Field, f: Field) -> Field:
    """Periodic convolution ``int k(x - y) f(y) dy`` via the transform."""
    k._check(f)
    return idft(Field(f.grid, dft(k).values * dft(f).values, FREQ))

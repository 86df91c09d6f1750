"""Thick sets on the lattice and the empirical Logvinenko-Sereda constant."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spectral import FREQ, Field, Grid, dft, idft, lp_norm, restrict


class BoxExceedsDomain(ValueError):
    pass


class DegenerateParams(ValueError):
    pass


class ZeroRestriction(ValueError):
    pass


def _box_cells(grid: Grid, L) -> tuple[int, ...]:
    L = np.broadcast_to(np.asarray(L, dtype=float), (grid.dim,))
    cells = []
    for li, h, e in zip(L, grid.spacing, grid.extent):
        if li > e * (1 + 1e-12):
            raise BoxExceedsDomain(f"box side {li:g} exceeds domain extent {e:g}")
        w = li / h
        if abs(w - round(w)) > 1e-9 * max(1.0, w) or round(w) < 1:
            raise ValueError(f"box side {li:g} is not a whole number of cells (h = {h:g})")
        cells.append(int(round(w)))
    return tuple(cells)


def window_sums(indicator: np.ndarray, widths) -> np.ndarray:
    """Periodic box sums: entry ``j`` counts cells ``j .. j + w - 1`` along every axis."""
    out = np.asarray(indicator, dtype=np.int64)
    for axis, w in enumerate(widths):
        n = out.shape[axis]
        ext = np.concatenate([out, np.take(out, np.arange(w), axis=axis)], axis=axis)
        zero = np.zeros_like(np.take(out, [0], axis=axis))
        csum = np.cumsum(np.concatenate([zero, ext], axis=axis), axis=axis)
        out = np.take(csum, np.arange(w, w + n), axis=axis) - np.take(csum, np.arange(n), axis=axis)
    return out


def measure_thickness(indicator, L, grid: Grid) -> float:
    """``min_x |E cap (box + x)| / |box|`` over lattice translates of the box ``(0, L)``."""
    indicator = np.asarray(indicator)
    if indicator.shape != grid.shape:
        raise ValueError("indicator shape does not match grid")
    widths = _box_cells(grid, L)
    counts = window_sums(indicator != 0, widths)
    return float(counts.min()) / math.prod(widths)


@dataclass
class ThickSet:
    grid: Grid
    indicator: np.ndarray
    L: tuple[float, ...]
    rho: float

    @classmethod
    def from_indicator(cls, grid: Grid, indicator, L) -> "ThickSet":
        ind = (np.asarray(indicator) != 0).astype(float)
        L = tuple(float(x) for x in np.broadcast_to(np.asarray(L, dtype=float), (grid.dim,)))
        return cls(grid, ind, L, measure_thickness(ind, L, grid))

    @property
    def L1(self) -> float:
        return float(sum(self.L))

    @property
    def measure(self) -> float:
        return float(self.indicator.sum() * self.grid.cell_volume)

    def as_field(self) -> Field:
        return self.grid.field(self.indicator)


def _cell_index(grid: Grid, size: float) -> list[np.ndarray]:
    # index of the size-cell containing each sample's left endpoint, per axis
    return [np.floor((x - o) / size + 1e-9).astype(int) for x, o in zip(np.meshgrid(*grid.axes(), indexing="ij"), grid.origin)]


def generate_thick_set(kind: str, grid: Grid, L=None, *, width: float = 1.0, period: float = 2.0, cell: float = 1.0,
                       density: float = 0.5, rng: np.random.Generator | None = None) -> ThickSet:
    """Build one of the standard families.

    ``periodic_slabs``: ``{x : x_0 mod period < width}`` (default ``L = period``).
    ``checkerboard``: alternating cubes of side ``cell`` (default ``L = 2 cell``).
    ``random_cells``: cubes of side ``cell`` kept with probability ``density``
    (default ``L`` = whole domain).
    """
    xs = np.meshgrid(*grid.axes(), indexing="ij")
    if kind == "periodic_slabs":
        if not 0 < width < period:
            raise DegenerateParams("need 0 < width < period")
        h0 = grid.spacing[0]
        ind = np.mod(xs[0] - grid.origin[0] + 1e-9 * h0, period) < width - 1e-9 * h0
        L = period if L is None else L
    elif kind == "checkerboard":
        if not cell > 0:
            raise DegenerateParams("cell must be positive")
        idx = _cell_index(grid, cell)
        ind = sum(idx) % 2 == 0
        L = 2 * cell if L is None else L
    elif kind == "random_cells":
        if not 0 < density <= 1 or not cell > 0:
            raise DegenerateParams("need density in (0, 1] and cell > 0")
        rng = rng or np.random.default_rng(0)
        idx = _cell_index(grid, cell)
        counts = [int(np.ceil(e / cell)) for e in grid.extent]
        keep = rng.random(counts) < density
        ind = keep[tuple(idx)]
        L = grid.extent if L is None else L
    else:
        raise ValueError(f"unknown thick-set kind {kind!r}")
    ts = ThickSet.from_indicator(grid, ind, L)
    if ts.rho <= 0:
        raise DegenerateParams(f"{kind} set has rho = 0 for L = {ts.L}")
    return ts


def ls_constants(rho: float, L1: float, d: int, K: float) -> tuple[float, float]:
    """``log d0`` and ``d1`` with ``d0 = exp(K d ln(K^d/rho))``, ``d1 = 2 |L|_1 ln(K^d/rho)``.

    ``log d0`` is returned because ``d0`` overflows for realistic ``K``.
    """
    ell = d * math.log(K) - math.log(rho)
    return K * d * ell, 2.0 * L1 * ell


def band_limited_probes(grid: Grid, lam: float, n: int, rng: np.random.Generator,
                        avoid: np.ndarray | None = None) -> list[Field]:
    """Random fields with spectrum in ``[-lam, lam]^d``.

    With ``avoid`` (an indicator), one extra probe is the band-limited part
    of the complement ``1 - avoid``, i.e. mass pushed away from the set.
    """
    box = np.all(np.abs(grid.freqs) <= lam, axis=-1)
    probes = []
    for _ in range(n):
        spec = np.zeros(grid.shape, dtype=complex)
        k = int(box.sum())
        spec[box] = rng.standard_normal(k) + 1j * rng.standard_normal(k)
        probes.append(idft(Field(grid, spec, FREQ)))
    if avoid is not None:
        comp = grid.field(1.0 - np.asarray(avoid, dtype=float))
        spec = dft(comp).values * box
        f = idft(Field(grid, spec, FREQ))
        if lp_norm(f, 2) > 0:
            probes.append(f)
    return probes


@dataclass
class LSResult:
    C_emp: float
    log_prediction: float
    d1: float
    log_d0: float
    passed: bool
    excluded: int

    @property
    def prediction(self) -> float:
        return math.exp(self.log_prediction) if self.log_prediction < 700 else math.inf


def measure_ls_constant(thick: ThickSet, lam: float, p: float, probes, K: float = 10.0) -> LSResult:
    """Worst ``||f|| / ||f||_{L_p(E)}`` over band-limited probes, against ``d0 e^{d1 lam}``."""
    worst, excluded = 0.0, 0
    for f in probes:
        num = lp_norm(f, p)
        den = lp_norm(restrict(f, thick.indicator), p)
        if den == 0:
            excluded += 1
            continue
        worst = max(worst, num / den)
    if excluded == len(probes):
        raise ZeroRestriction("every probe vanishes on E")
    log_d0, d1 = ls_constants(thick.rho, thick.L1, thick.grid.dim, K)
    log_pred = log_d0 + d1 * lam
    return LSResult(worst, log_pred, d1, log_d0, bool(math.log(worst) <= log_pred), excluded)

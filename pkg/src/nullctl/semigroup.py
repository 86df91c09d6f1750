"""Fourier-multiplier semigroups ``S_t = F^-1 exp(-t a) F`` on a periodic grid.

Evolution is exact in time: every ``S_t`` is a single multiplier, so there
is no stepping error anywhere downstream.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product

import numpy as np

from .spectral import FREQ, Field, Grid, apply_multiplier, idft, lp_norm
from .symbols import EllipticSymbol, adjoint_symbol


class NegativeTime(ValueError):
    pass


class FitFailed(RuntimeError):
    pass


@lru_cache(maxsize=64)
def lattice_symbol(symbol: EllipticSymbol, grid: Grid) -> np.ndarray:
    """Samples ``a(xi_k)`` on the frequency lattice.

    On the unpaired Nyquist rows ``xi`` and ``-xi`` alias to the same bin, so
    there ``a`` is averaged over the sign flips of the Nyquist components.
    This keeps ``a(-.)`` the exact lattice adjoint of ``a``.
    """
    if symbol.d != grid.dim:
        raise ValueError(f"symbol dimension {symbol.d} != grid dimension {grid.dim}")
    xi = grid.freqs
    nyq = grid.nyquist_mask
    out = np.zeros(grid.shape, dtype=complex)
    flips = list(product((1.0, -1.0), repeat=grid.dim))
    for signs in flips:
        s = np.where(nyq, np.asarray(signs), 1.0)
        out += symbol(xi * s)
    out /= len(flips)
    out.setflags(write=False)
    return out


class Semigroup:
    """``S_t`` for a symbol on a grid, with a write-once multiplier cache."""

    def __init__(self, symbol: EllipticSymbol, grid: Grid):
        self.symbol = symbol
        self.grid = grid
        self.a = lattice_symbol(symbol, grid)
        self._cache: dict[float, np.ndarray] = {}
        self._lock = threading.Lock()

    def __repr__(self):
        return f"Semigroup(m={self.symbol.m}, c={self.symbol.c:g}, omega={self.symbol.omega:g}, grid={self.grid.shape})"

    def multiplier(self, t: float) -> np.ndarray:
        t = float(t)
        if t < 0:
            raise NegativeTime(f"t = {t} < 0")
        m = self._cache.get(t)
        if m is None:
            m = np.exp(-t * self.a) if t > 0 else np.ones(self.grid.shape, dtype=complex)
            m.setflags(write=False)
            with self._lock:
                m = self._cache.setdefault(t, m)
        return m

    def apply(self, t: float, f: Field) -> Field:
        return apply_multiplier(f, self.multiplier(t))

    def apply_hilbert_adjoint(self, t: float, f: Field) -> Field:
        """``S_t^*`` for the L2 inner product (conjugated multiplier)."""
        return apply_multiplier(f, np.conj(self.multiplier(t)))

    def kernel(self, t: float) -> Field:
        return heat_kernel(self, t)

    def adjoint(self) -> "Semigroup":
        """Semigroup of ``a(-.)``: the dual for the bilinear pairing."""
        return Semigroup(adjoint_symbol(self.symbol), self.grid)

    def clear_cache(self):
        with self._lock:
            self._cache.clear()


def apply_semigroup(op: Semigroup, t: float, f: Field) -> Field:
    return op.apply(t, f)


def heat_kernel(op: Semigroup, t: float) -> Field:
    """Samples of ``k_t = F^-1 exp(-t a)`` in real space."""
    if t <= 0:
        raise NegativeTime("heat kernel needs t > 0")
    return idft(Field(op.grid, op.multiplier(t), FREQ))


@dataclass
class KernelBoundFit:
    c1: float
    c2: float
    passed: bool
    records: list[dict] = field(default_factory=list)


def kernel_bound_constant(op: Semigroup, t_samples, c2: float, floor: float = 1e-12) -> tuple[float, list[float]]:
    """Smallest ``c1`` with ``|k_t(x)| <= c1 e^{wt} t^{-d/m} exp(-c2 (|x|^m/t)^{1/(m-1)})``.

    Only samples with ``|k_t| > floor * max|k_t|`` enter; below that the
    kernel is roundoff.  Returns ``c1`` and the per-``t`` sup ratios.
    """
    d, m, w = op.symbol.d, op.symbol.m, op.symbol.omega
    r = np.sqrt(np.sum(op.grid.coords**2, axis=-1))
    ratios = []
    for t in t_samples:
        k = np.abs(heat_kernel(op, t).values)
        keep = k > floor * k.max()
        log_env = w * t - (d / m) * np.log(t) - c2 * (r[keep] ** m / t) ** (1.0 / (m - 1))
        ratios.append(float(np.max(np.log(k[keep]) - log_env)))
    with np.errstate(over="ignore"):
        ratios = np.exp(ratios)  # inf once the envelope decays faster than the kernel
    return float(ratios.max()), [float(x) for x in ratios]


def verify_kernel_bound(op: Semigroup, t_samples, c2_grid=None, knee: float = 1.5, floor: float = 1e-12) -> KernelBoundFit:
    """Fit ``(c1, c2)`` in the Gaussian-type kernel estimate.

    ``c1(c2)`` is nondecreasing in ``c2`` and flat while the envelope decays
    no faster than the kernel.  The reported ``c2`` is the largest scanned
    value whose ``c1`` stays within ``knee`` times the flat level.
    """
    if op.symbol.m < 2:
        raise FitFailed("kernel bound needs m >= 2")
    t_samples = [float(t) for t in t_samples]
    if not t_samples or min(t_samples) <= 0:
        raise NegativeTime("t samples must be positive")
    if c2_grid is None:
        c2_grid = np.logspace(-4, 0, 64)
    c1s = []
    for c2 in c2_grid:
        c1, _ = kernel_bound_constant(op, t_samples, c2, floor)
        c1s.append(c1)
    c1s = np.asarray(c1s)
    if not np.isfinite(c1s[0]):
        raise FitFailed("no finite c1 on the scan grid")
    ok = np.flatnonzero(np.isfinite(c1s) & (c1s <= knee * c1s[0]))
    best = ok[-1]
    c2 = float(c2_grid[best])
    c1, ratios = kernel_bound_constant(op, t_samples, c2, floor)
    records = [{"t": t, "sup_ratio": s, "c1": c1, "c2": c2} for t, s in zip(t_samples, ratios)]
    return KernelBoundFit(c1, c2, bool(np.isfinite(c1)), records)


@dataclass
class GrowthBound:
    M: float
    omega: float
    omega_fit: float
    t: list[float]
    norms: list[float]

    @property
    def omega_plus(self) -> float:
        return max(self.omega, 0.0)


def estimate_growth_bound(op: Semigroup, t_samples, probes=(), p: float = 2.0) -> GrowthBound:
    """Envelope ``M e^{omega t}`` of ``||S_t||`` over the samples.

    ``||S_t|| <= ||k_t||_1`` (Young); probe ratios can only sit below that
    but are folded in as a check.  ``omega`` is a least-squares slope of
    ``log ||k_t||_1``, replaced by the certified value when the fit is
    looser, and ``M >= 1`` is then inflated to cover every sample.
    """
    ts = sorted({0.0, *(float(t) for t in t_samples)})
    norms = []
    for t in ts:
        n = 1.0 if t == 0 else lp_norm(heat_kernel(op, t), 1)
        for f in probes:
            nf = lp_norm(f, p)
            if nf > 0:
                n = max(n, lp_norm(op.apply(t, f), p) / nf)
        norms.append(n)
    ts_a, logs = np.asarray(ts), np.log(norms)
    if len(ts) > 1:
        omega_fit = float(np.polyfit(ts_a, logs, 1)[0])
    else:
        omega_fit = op.symbol.omega
    omega = min(omega_fit, op.symbol.omega)
    M = max(1.0, float(np.exp(np.max(logs - omega * ts_a))))
    return GrowthBound(M, omega, omega_fit, ts, [float(n) for n in norms])

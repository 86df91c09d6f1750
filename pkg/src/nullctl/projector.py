"""Smooth frequency cutoffs, band projectors and dissipation measurements."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .spectral import FREQ, Field, Grid, apply_multiplier, idft, lp_norm
from .semigroup import Semigroup
from .symbols import EllipticSymbol, laplacian_power


class UnderResolved(ValueError):
    pass


class LambdaBelowThreshold(ValueError):
    pass


def _psi(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = np.exp(-1.0 / s[pos])
    return out


@dataclass(frozen=True)
class CutoffProfile:
    """Radial profile ``eta``: 1 on ``[0, inner]``, 0 on ``[1, inf)``, smooth glue between."""

    inner: float = 0.5

    def __post_init__(self):
        if not 0 < self.inner < 1:
            raise ValueError("inner radius must lie in (0, 1)")

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        s = (1.0 - r) / (1.0 - self.inner)
        a, b = _psi(s), _psi(1.0 - s)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(a + b > 0, a / np.where(a + b > 0, a + b, 1.0), 0.0)
        out = np.where(r <= self.inner, 1.0, out)
        return np.where(r >= 1.0, 0.0, out)


class BandProjector:
    """``P_lam f = F^-1(chi_lam) * f`` with ``chi_lam(xi) = eta(|xi| / lam)``."""

    def __init__(self, lam: float, grid: Grid, profile: CutoffProfile | None = None):
        if not lam > 0:
            raise ValueError("lambda must be positive")
        self.lam = float(lam)
        self.grid = grid
        self.profile = profile or CutoffProfile()
        self.chi = self.profile(grid.freq_norm / self.lam).astype(complex)
        self.chi.setflags(write=False)

    def apply(self, f: Field) -> Field:
        return apply_multiplier(f, self.chi)

    def complement(self, f: Field) -> Field:
        """``(I - P_lam) f``."""
        return apply_multiplier(f, 1.0 - self.chi)

    def kernel(self) -> Field:
        return idft(Field(self.grid, self.chi, FREQ))


def apply_projector(proj: BandProjector, f: Field) -> Field:
    return proj.apply(f)


def cutoff_l1_norm(profile: CutoffProfile, lam: float, grid: Grid) -> float:
    """``||F^-1 chi_lam||_1`` by grid quadrature.

    The transition band ``[inner*lam, lam]`` must span at least 4 frequency
    cells on every axis.
    """
    band = (1.0 - profile.inner) * lam
    if band < 4 * max(grid.freq_spacing):
        raise UnderResolved(f"transition band {band:g} covers < 4 frequency cells")
    if lam > min(np.pi * n / e for n, e in zip(grid.shape, grid.extent)):
        raise UnderResolved("cutoff extends past the Nyquist frequency")
    return lp_norm(BandProjector(lam, grid, profile).kernel(), 1)


@dataclass
class DissipationReport:
    lam: float
    rate_theoretical: float
    slope_fit: float
    prefactor_fit: float
    passed: bool
    t: list[float] = field(default_factory=list)
    ratios: list[float] = field(default_factory=list)

    def to_json(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        d["pass"] = d.pop("passed")
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    def bound(self, t) -> np.ndarray:
        return self.prefactor_fit * np.exp(-self.rate_theoretical * np.asarray(t))


def dissipation_probes(grid: Grid, lam: float, rng: np.random.Generator, n_noise: int = 8, comb_width: int = 4) -> list[Field]:
    """White-noise fields plus a frequency comb just above ``lam / 2``.

    The comb sits where ``1 - chi_lam`` first switches on, which is where the
    decay of ``(I - P_lam) S_t`` is slowest.
    """
    probes = []
    for _ in range(n_noise):
        probes.append(grid.field(rng.standard_normal(grid.shape)))
    r = grid.freq_norm
    dxi = max(grid.freq_spacing)
    lo = lam / 2
    comb = (r > lo) & (r <= lo + comb_width * dxi)
    if comb.any():
        spec = np.zeros(grid.shape, dtype=complex)
        spec[comb] = rng.standard_normal(comb.sum()) + 1j * rng.standard_normal(comb.sum())
        probes.append(idft(Field(grid, spec, FREQ)))
    return probes


def _measure(op: Semigroup, proj: BandProjector, rate: float, t_samples, probes, p: float, slope_tol: float) -> DissipationReport:
    ts = [float(t) for t in t_samples]
    norms = [lp_norm(f, p) for f in probes]
    ratios = []
    for t in ts:
        mult = (1.0 - proj.chi) * op.multiplier(t)
        worst = 0.0
        for f, nf in zip(probes, norms):
            if nf > 0:
                worst = max(worst, lp_norm(apply_multiplier(f, mult), p) / nf)
        ratios.append(worst)
    ratios_a = np.asarray(ratios)
    ts_a = np.asarray(ts)
    prefactor = float(np.max(ratios_a * np.exp(rate * ts_a)))
    positive = ratios_a > 0
    if positive.all() and len(ts) > 1:
        slope = float(np.polyfit(ts_a, np.log(ratios_a), 1)[0])
    elif not positive.any():
        slope = -math.inf
    else:
        # a ratio hit exact zero: nothing left to decay
        slope = -math.inf if len(ts) > 1 else math.nan
    passed = bool(np.isfinite(prefactor) and slope <= -rate * (1 - slope_tol))
    return DissipationReport(proj.lam, rate, slope, prefactor, passed, ts, [float(x) for x in ratios])


def measure_dissipation_laplacian(m: int, lam: float, t_samples, probes, grid: Grid | None = None, p: float = 2.0,
                                  profile: CutoffProfile | None = None, slope_tol: float = 0.05) -> DissipationReport:
    """Decay of ``(I - P_lam) G_t`` with ``G_t`` generated by ``|xi|^m``.

    Compared against the rate ``2^{-m-2} lam^m``.
    """
    if m % 2:
        raise ValueError("m must be even")
    grid = grid or probes[0].grid
    symbol = EllipticSymbol.from_coefficients(laplacian_power(grid.dim, m), grid.dim)
    rate = 2.0 ** (-m - 2) * lam**m
    return _measure(Semigroup(symbol, grid), BandProjector(lam, grid, profile), rate, t_samples, probes, p, slope_tol)


def lambda_threshold(symbol: EllipticSymbol) -> float:
    """``lam* = (2^{m+4} max(omega, 0) / c)^{1/m}``."""
    return (2.0 ** (symbol.m + 4) * symbol.omega_plus / symbol.c) ** (1.0 / symbol.m)


def measure_dissipation_general(symbol: EllipticSymbol, lam: float, t_samples, probes, grid: Grid | None = None,
                                p: float = 2.0, profile: CutoffProfile | None = None,
                                slope_tol: float = 0.05) -> DissipationReport:
    """Decay of ``(I - P_lam) S_t`` against ``2^{-m-4} c lam^m``.

    The fitted prefactor is the empirical dissipation constant ``d2``.
    """
    lam_star = lambda_threshold(symbol)
    if lam <= lam_star:
        raise LambdaBelowThreshold(f"lambda {lam:g} <= lambda* {lam_star:g}")
    grid = grid or probes[0].grid
    rate = 2.0 ** (-symbol.m - 4) * symbol.c * lam**symbol.m
    return _measure(Semigroup(symbol, grid), BandProjector(lam, grid, profile), rate, t_samples, probes, p, slope_tol)


def moment_decay(m: int, mus, grid: Grid, profile: CutoffProfile | None = None) -> list[float]:
    """``sup_x |x|^{d+1} |k_mu(x)|`` for ``k_mu = F^-1((1 - chi_mu) e^{-|xi|^m})``."""
    profile = profile or CutoffProfile()
    r = np.sqrt(np.sum(grid.coords**2, axis=-1))
    out = []
    for mu in mus:
        mult = (1.0 - profile(grid.freq_norm / mu)) * np.exp(-grid.freq_norm**m)
        k = idft(Field(grid, mult.astype(complex), FREQ)).values
        out.append(float(np.max(r ** (grid.dim + 1) * np.abs(k))))
    return out

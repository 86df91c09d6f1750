"""Observability constants, empirical observability ratios and duality checks.

The theoretical constants are astronomically large for any realistic
Kovrijkine constant, so every product is carried in log form; ``C_obs`` is
exposed both as ``log_C_obs`` and as a float that may be ``inf``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .control import ControlSolution, duhamel_evolve
from .projector import LambdaBelowThreshold, lambda_threshold
from .semigroup import GrowthBound, Semigroup, estimate_growth_bound
from .spectral import Field, pairing
from .symbols import EllipticSymbol
from .thickness import ThickSet, ls_constants

E_LN2 = math.e * math.log(2)


class ExponentOrder(ValueError):
    pass


class ZeroDenominator(ValueError):
    pass


def _exp(x: float) -> float:
    return math.exp(x) if x < 709 else math.inf


@dataclass
class ObservabilityConstants:
    log_d0: float
    d1: float
    d2: float
    d3: float
    gamma1: float
    gamma2: float
    gamma3: float
    lam_star: float
    M: float
    omega: float
    C_norm: float
    T: float
    r: float
    log_C1: float = 0.0
    C2: float = 0.0
    C3: float = 0.0
    log_C_obs: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def d0(self) -> float:
        return _exp(self.log_d0)

    @property
    def C1(self) -> float:
        return _exp(self.log_C1)

    @property
    def C_obs(self) -> float:
        return _exp(self.log_C_obs)

    @property
    def omega_plus(self) -> float:
        return max(self.omega, 0.0)

    @property
    def time_exponent(self) -> float:
        return self.gamma1 * self.gamma3 / (self.gamma2 - self.gamma1)

    def log_cobs_at(self, T: float) -> float:
        """``log C_obs`` at another horizon with every other input fixed."""
        tr = 0.0 if math.isinf(self.r) else math.log(T) / self.r
        return self.log_C1 - tr + self.C2 / T**self.time_exponent + self.C3 * T

    def to_json(self) -> dict:
        d = asdict(self)
        d.update(d0=self.d0, C1=self.C1, C_obs=self.C_obs)
        return d


def compute_abstract_cobs(d0: float | None, d1: float, d2: float, d3: float, gamma1: float, gamma2: float,
                          gamma3: float, lam_star: float, M: float, omega: float, C_norm: float, T: float,
                          r: float, *, log_d0: float | None = None) -> ObservabilityConstants:
    """Literal evaluation of the abstract observability constant chain.

    C1 = 4 M d0 max{(4 d2 M^2 (d0 ||C|| + 1))^{8/(e ln 2)}, exp(4 d1 (2 lam*)^g1)}
    C2 = 4 (2^g1 (2 4^g3)^{g1 g2/(g2-g1)} d1^g2 / d3^g1)^{1/(g2-g1)}
    C3 = max(omega, 0) (1 + 10/(e ln 2))
    C_obs = C1 / T^{1/r} exp(C2 / T^{g1 g3/(g2-g1)} + C3 T)
    """
    if gamma1 >= gamma2:
        raise ExponentOrder(f"gamma1 = {gamma1} must be < gamma2 = {gamma2}")
    if log_d0 is None:
        if d0 is None or d0 <= 0:
            raise ValueError("d0 must be positive")
        log_d0 = math.log(d0)
    if d1 <= 0 or d3 <= 0 or T <= 0:
        raise ValueError("d1, d3 and T must be positive")
    if d2 < 1 or M < 1:
        raise ValueError("d2 and M must be >= 1")

    if C_norm > 0:
        log_dc1 = np.logaddexp(log_d0 + math.log(C_norm), 0.0)
    else:
        log_dc1 = 0.0
    first = 8.0 / E_LN2 * (math.log(4 * d2 * M**2) + log_dc1)
    second = 4 * d1 * (2 * lam_star) ** gamma1
    log_C1 = math.log(4 * M) + log_d0 + max(first, second)

    g = gamma2 - gamma1
    try:
        C2 = 4 * (2**gamma1 * (2 * 4**gamma3) ** (gamma1 * gamma2 / g) * d1**gamma2 / d3**gamma1) ** (1 / g)
    except OverflowError:
        log_inner = (gamma1 * math.log(2) + gamma1 * gamma2 / g * math.log(2 * 4**gamma3)
                     + gamma2 * math.log(d1) - gamma1 * math.log(d3))
        C2 = 4 * _exp(log_inner / g)
    C3 = max(omega, 0.0) * (1 + 10 / E_LN2)

    c = ObservabilityConstants(log_d0, d1, d2, d3, gamma1, gamma2, gamma3, lam_star, M, omega, C_norm, T, r)
    c.log_C1, c.C2, c.C3 = float(log_C1), float(C2), float(C3)
    c.log_C_obs = c.log_cobs_at(T)
    return c


def compute_parabolic_cobs(symbol: EllipticSymbol, thick: ThickSet, T: float, p: float, r: float, K: float = 10.0,
                           empirical_d2: float = 1.0, growth: GrowthBound | None = None,
                           d2_safety: float = 2.0) -> ObservabilityConstants:
    """Instantiate the chain with ``g1 = 1, g2 = m, g3 = 1`` for a thick set.

    ``d2`` is the fitted dissipation prefactor times ``d2_safety`` (at least 1);
    ``(M, omega)`` come from :func:`estimate_growth_bound` when not given.
    """
    m = symbol.m
    log_d0, d1 = ls_constants(thick.rho, thick.L1, thick.grid.dim, K)
    d3 = 2.0 ** (-m - 4) * symbol.c
    if growth is None:
        growth = estimate_growth_bound(Semigroup(symbol, thick.grid), np.linspace(0, T, 9)[1:])
    d2 = max(1.0, d2_safety * empirical_d2)
    c = compute_abstract_cobs(None, d1, d2, d3, 1.0, float(m), 1.0, lambda_threshold(symbol), growth.M,
                              growth.omega, 1.0, T, r, log_d0=log_d0)
    c.meta = {"rho": thick.rho, "L1": thick.L1, "K": K, "p": p, "m": m, "c": symbol.c,
              "empirical_d2": empirical_d2}
    return c


def _batch_fft(probes) -> np.ndarray:
    return np.fft.fftn(np.stack([f.values for f in probes]), axes=tuple(range(1, probes[0].grid.dim + 1)))


def _norms(arr: np.ndarray, p: float, h: float) -> np.ndarray:
    axes = tuple(range(1, arr.ndim))
    a = np.abs(arr)
    if math.isinf(p):
        return a.max(axis=axes)
    return (h * np.sum(a**p, axis=axes)) ** (1 / p)


def trajectory_norms(op: Semigroup, probes, times, indicator=None, p: float = 2.0) -> np.ndarray:
    """``||(S_t f)|_E||_p`` for every probe (rows) and time (columns)."""
    spec = _batch_fft(probes)
    axes = tuple(range(1, spec.ndim))
    h = op.grid.cell_volume
    mask = 1.0 if indicator is None else np.asarray(indicator, dtype=float)
    out = np.empty((len(probes), len(times)))
    for j, t in enumerate(times):
        vals = np.fft.ifftn(spec * op.multiplier(t), axes=axes) * mask
        out[:, j] = _norms(vals, p, h)
    return out


def _time_norm(G: np.ndarray, times: np.ndarray, r: float) -> np.ndarray:
    if math.isinf(r):
        return G.max(axis=-1)
    return np.trapezoid(G**r, times, axis=-1) ** (1 / r)


@dataclass
class ObservabilityRatio:
    C_emp: float
    ratios: list[float]
    excluded: int
    nodes: int
    richardson_ok: bool


def measure_observability_ratio(op: Semigroup, thick: ThickSet, T: float, p: float, r: float, probes,
                                nodes: int = 64, richardson_tol: float = 1e-3,
                                max_doublings: int = 4) -> ObservabilityRatio:
    """``max_f ||S_T f|| / (int_0^T ||(S_t f)|_E||^r dt)^{1/r}`` by composite trapezoid.

    The node count is doubled until the time integral moves by less than
    ``richardson_tol`` (relative) between refinements.
    """
    if nodes < 64:
        raise ValueError("time quadrature needs at least 64 nodes")
    final = trajectory_norms(op, probes, [T], None, p)[:, 0]
    n = nodes
    times = np.linspace(0, T, n)
    den = _time_norm(trajectory_norms(op, probes, times, thick.indicator, p), times, r)
    ok = math.isinf(r)
    for _ in range(max_doublings if not ok else 0):
        n = 2 * n - 1
        times = np.linspace(0, T, n)
        den2 = _time_norm(trajectory_norms(op, probes, times, thick.indicator, p), times, r)
        live = den2 > 0
        change = np.max(np.abs(den2[live] - den[live]) / den2[live], initial=0.0)
        den = den2
        if change < richardson_tol:
            ok = True
            break
    live = den > 0
    if not live.any():
        raise ZeroDenominator("every probe is invisible on E over [0, T]")
    ratios = final[live] / den[live]
    return ObservabilityRatio(float(ratios.max()), [float(x) for x in ratios], int((~live).sum()), n, ok)


@dataclass
class IterationReport:
    lam: float
    worst_slack: float
    max_ratio: float
    ratios: np.ndarray
    passed: bool

    def to_json(self) -> dict:
        return {"lambda": self.lam, "worst_slack": self.worst_slack, "max_ratio": self.max_ratio, "pass": self.passed}


def verify_iteration_inequality(op: Semigroup, thick: ThickSet, lam: float, t_grid, probes,
                                consts: ObservabilityConstants, p: float = 2.0, n_sub: int = 33) -> IterationReport:
    """Check the one-step bound driving the iteration at every ``t``.

    F(t) <= 2 M e^{w+ T} d0 e^{d1 lam^g1} / t int_{t/2}^t G
            + d2 M^2 e^{5 w+ T/4} e^{d1 lam^g1} e^{-d3 lam^g2 (t/4)^g3} (d0 ||C|| + 1) F(t/4)

    with ``F = ||S_t f||`` and ``G = ||(S_t f)|_E||``.  ``ratios[i, j]`` is
    LHS/RHS for probe ``i`` at ``t_j``; the slack is ``1 - ratio``.
    """
    if lam <= consts.lam_star:
        raise LambdaBelowThreshold(f"lambda {lam:g} <= lambda* {consts.lam_star:g}")
    c = consts
    wT = c.omega_plus * c.T
    lam_g1 = c.d1 * lam**c.gamma1
    log_dc1 = float(np.logaddexp(c.log_d0 + math.log(c.C_norm), 0.0)) if c.C_norm > 0 else 0.0
    t_grid = np.asarray(t_grid, dtype=float)
    ratios = np.empty((len(probes), len(t_grid)))
    for j, t in enumerate(t_grid):
        F = trajectory_norms(op, probes, [t, t / 4], None, p)
        sub = np.linspace(t / 2, t, n_sub)
        G = trajectory_norms(op, probes, sub, thick.indicator, p)
        integral = np.trapezoid(G, sub, axis=1)
        with np.errstate(divide="ignore"):
            log1 = math.log(2 * c.M) + wT + c.log_d0 + lam_g1 - math.log(t) + np.log(integral)
            log2 = (math.log(c.d2 * c.M**2) + 1.25 * wT + lam_g1 - c.d3 * lam**c.gamma2 * (t / 4) ** c.gamma3
                    + log_dc1 + np.log(F[:, 1]))
            rhs = np.logaddexp(log1, log2)
            ratios[:, j] = np.exp(np.log(F[:, 0]) - rhs)
    max_ratio = float(np.nanmax(ratios))
    return IterationReport(lam, 1.0 - max_ratio, max_ratio, ratios, bool(max_ratio <= 1.0))


@dataclass
class DualityReport:
    lhs: complex
    rhs: complex
    rhs_reversed: complex
    rel_err: float
    dual_norm: float
    passed: bool

    def to_json(self) -> dict:
        d = asdict(self)
        for k in ("lhs", "rhs", "rhs_reversed"):
            d[k] = [d[k].real, d[k].imag]
        return d


def _gauss_nodes(knots, total: int):
    k = len(knots) - 1
    per = max(1, total // k)
    x, w = np.polynomial.legendre.leggauss(per)
    ts, ws, idx = [], [], []
    for i, (lo, hi) in enumerate(zip(knots[:-1], knots[1:])):
        ts.append(lo + (x + 1) * (hi - lo) / 2)
        ws.append(w * (hi - lo) / 2)
        idx.append(np.full(per, i))
    return np.concatenate(ts), np.concatenate(ws), np.concatenate(idx)


def verify_dual_norm_identity(op: Semigroup, thick: ThickSet, control: ControlSolution, g: Field, r: float = 2.0,
                              nodes: int = 256, tol: float = 1e-8) -> DualityReport:
    """Check ``<B^T u, g> = int_0^T <u(t), (S'_{T-t} g)|_E> dt`` (bilinear pairing).

    ``S'`` is the semigroup of ``a(-.)``.  The time integral uses
    Gauss-Legendre nodes inside each knot interval, ``nodes`` in total.
    """
    T = control.T
    x0 = op.grid.zeros()
    lhs = pairing(duhamel_evolve(op, x0, control, T), g)
    dual = op.adjoint()
    ts, ws, idx = _gauss_nodes(control.knots, nodes)
    mask = thick.indicator
    rhs = 0j
    for t, w, i in zip(ts, ws, idx):
        v = dual.apply(T - t, g).values * mask
        rhs += w * op.grid.cell_volume * np.sum(control.values[i] * v)
    # same integral after s = T - t, on the mirrored partition
    K = len(control.knots) - 1
    ss, wr, idx_r = _gauss_nodes(T - control.knots[::-1], nodes)
    rev = 0j
    for s, w, i in zip(ss, wr, idx_r):
        v = dual.apply(s, g).values * mask
        rev += w * op.grid.cell_volume * np.sum(control.values[K - 1 - i] * v)
    scale = max(abs(lhs), abs(rhs), 1e-300)
    rel = abs(lhs - rhs) / scale
    # dual norm of (B^T)' g in L_{r'}((0,T); L_2(E))
    rp = math.inf if r == 1 else (1.0 if math.isinf(r) else r / (r - 1))
    times = np.linspace(0, T, nodes)
    G = trajectory_norms(dual, [g], times, mask, 2.0)[0]
    dual_norm = float(_time_norm(G, times, rp))
    if lhs == 0 and rhs == 0:
        rel = 0.0
    return DualityReport(complex(lhs), complex(rhs), complex(rev), float(rel), dual_norm, bool(rel <= tol))

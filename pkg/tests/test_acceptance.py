"""Acceptance criteria, one test per criterion.

Each test prints a single ``criterion N: PASS|FAIL ...`` line; the lines are
also repeated in pytest's terminal summary.  Run directly with
``python3 tests/test_acceptance.py`` to get just those lines.
"""
import math
import time

import numpy as np
import pytest

from nullctl.control import ControlSolution, duhamel_evolve, synthesize_control_hum
from nullctl.observability import (compute_abstract_cobs, compute_parabolic_cobs, measure_observability_ratio,
                                   verify_dual_norm_identity, verify_iteration_inequality)
from nullctl.projector import (BandProjector, CutoffProfile, cutoff_l1_norm, dissipation_probes, lambda_threshold,
                               measure_dissipation_general, measure_dissipation_laplacian)
from nullctl.semigroup import Semigroup
from nullctl.spectral import Grid, lp_norm, pairing
from nullctl.symbols import EllipticSymbol, heat_symbol
from nullctl.thickness import band_limited_probes, generate_thick_set, measure_ls_constant, measure_thickness
from oracles import brute_thickness, richardson_riemann

RESULTS: dict[int, str] = {}
HEAT = heat_symbol(1)
DRIFT = {(2,): 1, (1,): 1j}


def record(n: int, ok: bool, elapsed: float, budget: float, detail: str):
    ok = bool(ok and elapsed < budget)
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  ({elapsed:.2f} s / {budget:g} s)  {detail}"
    RESULTS[n] = line
    print(line)
    assert ok, line


def test_criterion_01_semigroup_exactness():
    t0 = time.perf_counter()
    g = Grid((1024,), (40 * np.pi,))
    op = Semigroup(HEAT, g)
    f = g.sample(lambda x: np.exp(-x**2 / 2))
    errs = []
    for t in (0.1, 0.5, 1.0):
        exact = g.sample(lambda x: (1 + 2 * t) ** -0.5 * np.exp(-x**2 / (2 * (1 + 2 * t)))).values
        errs.append(np.max(np.abs(op.apply(t, f).values - exact)) / np.max(np.abs(exact)))
    el = time.perf_counter() - t0
    record(1, max(errs) <= 1e-8, el, 1.0, f"max rel err {max(errs):.2e} (tol 1e-8)")


def test_criterion_02_semigroup_law():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    worst = 0.0
    for shape in ((256,), (64, 64)):
        d = len(shape)
        coeffs = {tuple(2 * (i == j) for i in range(d)): 1 for j in range(d)}
        coeffs[tuple(int(i == 0) for i in range(d))] = 1j
        g = Grid(shape, (16.0,) * d)
        op = Semigroup(EllipticSymbol.from_coefficients(coeffs, d), g)
        for _ in range(4):
            f = g.field(rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
            t, s = rng.uniform(0, 1, 2)
            rhs = op.apply(t + s, f).values
            lhs = op.apply(t, op.apply(s, f)).values
            worst = max(worst, np.max(np.abs(lhs - rhs)) / np.max(np.abs(rhs)))
    el = time.perf_counter() - t0
    record(2, worst <= 1e-12, el, 1.0, f"max rel err {worst:.2e} (tol 1e-12)")


def test_criterion_03_lambda_invariance():
    t0 = time.perf_counter()
    g = Grid((8192,), (64 * np.pi,))
    vals = [cutoff_l1_norm(CutoffProfile(), lam, g) for lam in (4, 8, 16)]
    spread = (max(vals) - min(vals)) / min(vals)
    el = time.perf_counter() - t0
    record(3, spread < 0.005, el, 2.0, f"L1 norms {', '.join(f'{v:.5f}' for v in vals)}; spread {spread:.3%}")


def test_criterion_04_laplacian_dissipation():
    t0 = time.perf_counter()
    g = Grid((512,), (64.0,))
    t = np.linspace(0.05, 1, 20)
    rng = np.random.default_rng(4)
    ok, parts = True, []
    for lam in (4.0, 8.0):
        rep = measure_dissipation_laplacian(2, lam, t, dissipation_probes(g, lam, rng))
        below = np.all(np.asarray(rep.ratios) <= rep.bound(t) * (1 + 1e-12))
        slope_ok = rep.slope_fit <= -0.95 * lam**2 / 16
        ok &= bool(below and slope_ok)
        parts.append(f"lam={lam:g}: slope {rep.slope_fit:.2f} vs {-0.95 * lam**2 / 16:.2f}")
    el = time.perf_counter() - t0
    record(4, ok, el, 5.0, "; ".join(parts))


def test_criterion_05_general_dissipation():
    t0 = time.perf_counter()
    sym = EllipticSymbol.from_coefficients(DRIFT, 1)
    g = Grid((512,), (64.0,))
    t = np.linspace(0.05, 1, 20)
    rng = np.random.default_rng(5)
    lam_star = lambda_threshold(sym)
    ok, parts = True, [f"(c, omega) = ({sym.c:g}, {sym.omega:g}), lam* = {lam_star:g}"]
    for lam in (4.0, 8.0):
        rep = measure_dissipation_general(sym, lam, t, dissipation_probes(g, lam, rng))
        target = -0.95 * sym.c * lam**2 / 64
        ok &= bool(lam > lam_star and rep.slope_fit <= target)
        parts.append(f"lam={lam:g}: slope {rep.slope_fit:.2f} vs {target:.3f}")
    op = Semigroup(sym, g)
    P = BandProjector(4.0, g)
    f = g.field(rng.standard_normal(512))
    a = P.complement(op.apply(0.3, f)).values
    b = op.apply(0.3, P.complement(f)).values
    comm = np.max(np.abs(a - b)) / np.max(np.abs(a))
    ok &= comm <= 1e-12
    parts.append(f"commutation err {comm:.1e}")
    el = time.perf_counter() - t0
    record(5, ok, el, 5.0, "; ".join(parts))


def test_criterion_06_thickness_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    mismatches = 0
    for shape in ((64,), (32, 32)):
        g = Grid(shape, tuple(float(n) for n in shape))
        for _ in range(50):
            ind = rng.random(shape) < rng.uniform(0.1, 0.9)
            widths = tuple(int(rng.integers(1, 9)) for _ in shape)
            mismatches += measure_thickness(ind, widths, g) != brute_thickness(ind, widths)
    el = time.perf_counter() - t0
    record(6, mismatches == 0, el, 2.0, f"{mismatches} mismatches over 100 indicators")


def test_criterion_07_logvinenko_sereda():
    t0 = time.perf_counter()
    g = Grid((512,), (64.0,))
    sets = {0.5: generate_thick_set("periodic_slabs", g, 2.0, width=1, period=2),
            0.25: generate_thick_set("periodic_slabs", g, 4.0, width=1, period=4)}
    ok, parts = True, []
    for lam in (4.0, 8.0):
        C = {}
        for rho, ts in sets.items():
            assert ts.rho == rho
            probes = band_limited_probes(g, lam, 63, np.random.default_rng(int(7 * lam)), avoid=ts.indicator)
            res = measure_ls_constant(ts, lam, 2.0, probes, K=10)
            ok &= res.passed and len(probes) == 64
            C[rho] = res.C_emp
        ok &= C[0.25] >= C[0.5]
        parts.append(f"lam={lam:g}: C_emp(1/2)={C[0.5]:.2f}, C_emp(1/4)={C[0.25]:.2f}")
    el = time.perf_counter() - t0
    record(7, ok, el, 10.0, "; ".join(parts))


def test_criterion_08_constant_chain():
    t0 = time.perf_counter()
    base = dict(d0=1.0, d1=1.0, d2=1.0, d3=1.0, gamma1=1.0, gamma2=2.0, gamma3=1.0, lam_star=0.0, M=1.0,
                omega=0.0, C_norm=1.0, T=1.0, r=2.0)
    c = compute_abstract_cobs(**base)
    c_neg = compute_abstract_cobs(**{**base, "omega": -1.0})
    el = time.perf_counter() - t0
    ok = c.C2 == 512.0 and c_neg.C3 == 0.0 and c.C3 == 0.0 and abs(c.C1 / 2.73e4 - 1) < 0.01
    record(8, ok, el, 0.1, f"C2 = {c.C2:g}, C3 = {c_neg.C3:g}, C1 = {c.C1:.6g}")


def _heat_setup():
    g = Grid((512,), (64.0,))
    ts = generate_thick_set("periodic_slabs", g, 2.0, width=1, period=2)
    op = Semigroup(HEAT, g)
    probes = dissipation_probes(g, 4.0, np.random.default_rng(94))
    d2_fit = measure_dissipation_general(HEAT, 4.0, np.linspace(0.05, 1, 20), probes).prefactor_fit
    return g, ts, op, d2_fit


def test_criterion_09_observability():
    t0 = time.perf_counter()
    g, ts, op, d2_fit = _heat_setup()
    probes = band_limited_probes(g, 8.0, 63, np.random.default_rng(9), avoid=ts.indicator)
    logs, cobs = [], {}
    ok = ts.rho == 0.5 and len(probes) == 64
    for T in (1.0, 0.5, 0.25):
        c = compute_parabolic_cobs(HEAT, ts, T, 2.0, 2.0, K=10, empirical_d2=d2_fit, d2_safety=2.0)
        obs = measure_observability_ratio(op, ts, T, 2.0, 2.0, probes)
        ok &= obs.richardson_ok and obs.excluded == 0
        if T == 1.0:
            ok &= all(math.log(x) <= c.log_C_obs for x in obs.ratios)
        logs.append(math.log(obs.C_emp))
        cobs[T] = c
    inv = np.array([1.0, 2.0, 4.0])
    slopes = np.diff(logs) / np.diff(inv)
    ok &= bool(np.all(slopes <= cobs[1.0].C2))
    el = time.perf_counter() - t0
    record(9, ok, el, 30.0, f"C_emp(T=1,1/2,1/4) = {', '.join(f'{math.exp(x):.3f}' for x in logs)}; "
                            f"log C_obs(T=1) = {cobs[1.0].log_C_obs:.4g}; slopes {np.round(slopes, 3).tolist()} "
                            f"<= C2 = {cobs[1.0].C2:.4g}")


def test_criterion_10_iteration_inequality():
    t0 = time.perf_counter()
    g, ts, op, d2_fit = _heat_setup()
    consts = compute_parabolic_cobs(HEAT, ts, 1.0, 2.0, 2.0, K=10, empirical_d2=d2_fit)
    probes = band_limited_probes(g, 8.0, 16, np.random.default_rng(10))
    t_grid = np.linspace(1 / 32, 1, 32)
    reps = [verify_iteration_inequality(op, ts, lam, t_grid, probes, consts) for lam in (4.0, 8.0)]
    ok = all(r.passed and r.worst_slack >= 0 and r.ratios.shape == (16, 32) for r in reps)
    el = time.perf_counter() - t0
    record(10, ok, el, 10.0, "worst LHS/RHS " + ", ".join(f"lam={r.lam:g}: {r.max_ratio:.2e}" for r in reps))


def test_criterion_11_control_synthesis():
    t0 = time.perf_counter()
    g = Grid((256,), (64.0,))
    ts = generate_thick_set("periodic_slabs", g, 2.0, width=1, period=2)
    op = Semigroup(HEAT, g)
    x0 = g.sample(lambda x: np.exp(-x**2 / 2))
    n0 = lp_norm(x0, 2)
    sol = synthesize_control_hum(op, ts.indicator, x0, 1.0, 64, 1e-4 * n0, eps=0.0, max_iter=500)
    d2_fit = measure_dissipation_general(HEAT, 4.0, np.linspace(0.05, 1, 20),
                                         dissipation_probes(g, 4.0, np.random.default_rng(94))).prefactor_fit
    c = compute_parabolic_cobs(HEAT, ts, 1.0, 2.0, 2.0, K=10, empirical_d2=d2_fit)
    # Duhamel against time stepping: Romberg-extrapolated left Riemann sums
    # on 512 / 1024 / 2048 / 4096 steps
    pieces = [np.fft.fft(v * ts.indicator) for v in sol.values]
    oracle = np.fft.ifft(richardson_riemann(op.a, np.fft.fft(x0.values), pieces, sol.knots, 1.0))
    ours = duhamel_evolve(op, x0, sol, 1.0).values
    duh = np.max(np.abs(ours - oracle)) / np.max(np.abs(oracle))
    ok = (sol.iterations <= 500 and sol.residual <= 1e-4 * n0 and ts.rho == 0.5
          and math.log(sol.cost) <= c.log_C_obs + math.log(n0) and duh <= 1e-8)
    el = time.perf_counter() - t0
    record(11, ok, el, 60.0, f"{sol.iterations} CG iterations, residual/|x0| {sol.residual / n0:.2e}, "
                             f"cost {sol.cost:.4g} vs log(C_obs |x0|) {c.log_C_obs + math.log(n0):.4g}, "
                             f"Duhamel err {duh:.1e}")


def test_criterion_12_duality():
    t0 = time.perf_counter()
    rng = np.random.default_rng(12)
    g = Grid((256,), (32.0,))
    ts = generate_thick_set("periodic_slabs", g, 2.0, width=1, period=2)
    op = Semigroup(EllipticSymbol.from_coefficients(DRIFT, 1), g)
    knots = np.linspace(0, 1, 17)
    u = ControlSolution(g, knots, rng.standard_normal((16, 256)) * ts.indicator, ts.indicator)
    gp = g.field(rng.standard_normal(256))
    rep = verify_dual_norm_identity(op, ts, u, gp, r=2.0, nodes=256)
    f, h = g.field(rng.standard_normal(256)), g.field(rng.standard_normal(256))
    worst = 0.0
    for t in (0.1, 0.5, 1.0):
        lhs = pairing(op.apply(t, f), h)
        rhs = pairing(f, op.adjoint().apply(t, h))
        worst = max(worst, abs(lhs - rhs) / abs(lhs))
    el = time.perf_counter() - t0
    record(12, rep.rel_err <= 1e-8 and worst <= 1e-10, el, 5.0,
           f"pairing rel err {rep.rel_err:.1e} (tol 1e-8); adjoint pairing err {worst:.1e} (tol 1e-10)")


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q", "-s", "-p", "no:cacheprovider"]))

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nullctl.semigroup import (NegativeTime, Semigroup, apply_semigroup, estimate_growth_bound, heat_kernel,
                               kernel_bound_constant, lattice_symbol, verify_kernel_bound)
from nullctl.spectral import Grid, convolve, lp_norm, pairing
from nullctl.symbols import EllipticSymbol, heat_symbol
from oracles import direct_periodic_convolution

HEAT = heat_symbol(1)


def rand(grid, rng, complex_=True):
    v = rng.standard_normal(grid.shape)
    if complex_:
        v = v + 1j * rng.standard_normal(grid.shape)
    return grid.field(v)


def test_identity_at_zero(rng):
    g = Grid((64,), (10.0,))
    op = Semigroup(HEAT, g)
    f = rand(g, rng)
    assert np.allclose(op.apply(0, f).values, f.values, rtol=0, atol=1e-12)
    assert np.all(op.multiplier(0) == 1)
    with pytest.raises(NegativeTime):
        op.multiplier(-0.1)


@pytest.mark.parametrize("t", [0.1, 0.5, 1.0])
def test_gaussian_closed_form(t):
    g = Grid((1024,), (40 * np.pi,))
    f = g.sample(lambda x: np.exp(-x**2 / 2))
    exact = g.sample(lambda x: (1 + 2 * t) ** -0.5 * np.exp(-x**2 / (2 * (1 + 2 * t))))
    out = apply_semigroup(Semigroup(HEAT, g), t, f)
    assert np.max(np.abs(out.values - exact.values)) / np.max(np.abs(exact.values)) <= 1e-8


@pytest.mark.parametrize("t", [0.25, 1.0])
def test_heat_kernel_closed_form(t):
    g = Grid((1024,), (40 * np.pi,))
    k = heat_kernel(Semigroup(HEAT, g), t)
    exact = g.sample(lambda x: (4 * np.pi * t) ** -0.5 * np.exp(-x**2 / (4 * t)))
    assert np.max(np.abs(k.values - exact.values)) <= 1e-8 * np.max(np.abs(exact.values))
    # DC bin: integral of the kernel is exp(-t a(0)) = 1
    assert np.isclose(np.sum(k.values) * g.cell_volume, 1.0, rtol=1e-12)


def test_kernel_integral_for_shifted_symbol():
    g = Grid((256,), (40.0,))
    k = heat_kernel(Semigroup(heat_symbol(1).shifted(0.5), g), 0.7)
    assert np.isclose(np.sum(k.values) * g.cell_volume, np.exp(0.5 * 0.7), rtol=1e-12)


def test_convolution_path_matches_direct_sum(rng):
    g = Grid((64,), (8.0,))
    op = Semigroup(EllipticSymbol.from_coefficients({(2,): 1, (1,): 0.5j}, 1), g)
    f = rand(g, rng)
    k = heat_kernel(op, 0.3)
    direct = direct_periodic_convolution(k.values, f.values, g.cell_volume)
    assert np.allclose(op.apply(0.3, f).values, direct, rtol=1e-11, atol=1e-11)
    assert np.allclose(convolve(k, f).values, direct, rtol=1e-11, atol=1e-11)


@pytest.mark.parametrize("shape", [(128,), (32, 32)])
def test_semigroup_law(shape, rng):
    d = len(shape)
    g = Grid(shape, (12.0,) * d)
    op = Semigroup(EllipticSymbol.from_coefficients({**{tuple(2 * (i == j) for i in range(d)): 1 for j in range(d)},
                                                     tuple(int(i == 0) for i in range(d)): 1j}, d), g)
    f = rand(g, rng)
    for t, s in [(0.1, 0.3), (1.0, 1.0), (0.01, 2.5)]:
        lhs = op.apply(t, op.apply(s, f)).values
        rhs = op.apply(t + s, f).values
        assert np.max(np.abs(lhs - rhs)) <= 1e-12 * max(np.max(np.abs(rhs)), 1e-300) + 1e-14


def test_multiplier_respects_certified_pair():
    g = Grid((256,), (20.0,))
    s = EllipticSymbol.from_coefficients({(4,): 1, (2,): -2, (1,): 1j}, 1)
    op = Semigroup(s, g)
    xi = np.abs(g.freqs[..., 0])
    for t in (0.01, 0.1, 1.0):
        bound = np.exp(-t * (s.c * xi**4 - s.omega))
        assert np.all(np.abs(op.multiplier(t)) <= bound * (1 + 1e-12))


def test_lattice_symbol_nyquist_symmetric():
    g = Grid((16,), (4.0,))
    s = EllipticSymbol.from_coefficients({(2,): 1, (1,): 1j}, 1)
    a = lattice_symbol(s, g)
    nyq = g.nyquist_mask[..., 0]
    # odd part cancels on the Nyquist bin, so the symbol there is real
    assert np.allclose(a[nyq].imag, 0)


def test_adjoint_pairing(rng):
    g = Grid((128,), (16.0,))
    s = EllipticSymbol.from_coefficients({(2,): 1, (1,): 2j, (0,): 0.3}, 1)
    op = Semigroup(s, g)
    f, h = rand(g, rng), rand(g, rng)
    lhs = pairing(op.apply(0.4, f), h)
    rhs = pairing(f, op.adjoint().apply(0.4, h))
    assert abs(lhs - rhs) <= 1e-10 * abs(lhs)


def test_young_contractivity_surrogate(rng):
    g = Grid((256,), (30.0,))
    op = Semigroup(EllipticSymbol.from_coefficients({(2,): 1, (1,): 1j}, 1), g)
    for t in (0.05, 0.5, 2.0):
        k1 = lp_norm(heat_kernel(op, t), 1)
        for _ in range(5):
            f = rand(g, rng)
            for p in (1, 2, np.inf):
                assert lp_norm(op.apply(t, f), p) <= k1 * lp_norm(f, p) * (1 + 1e-10)


def test_kernel_bound_heat():
    g = Grid((1024,), (40 * np.pi,))
    op = Semigroup(HEAT, g)
    fit = verify_kernel_bound(op, [0.25, 0.5, 1.0, 2.0])
    assert fit.passed
    assert 0 < fit.c2 <= 0.25
    # at c2 = 1/4 the closed form gives c1 = (4 pi)^{-1/2} exactly; the floor keeps
    # FFT roundoff in the far tail (|k| ~ 1e-17 absolute) out of the ratio
    c1, _ = kernel_bound_constant(op, [0.25, 0.5, 1.0], 0.25, floor=1e-8)
    assert c1 == pytest.approx((4 * np.pi) ** -0.5, rel=1e-6)


def test_kernel_sup_decay_large_t():
    g = Grid((1024,), (40 * np.pi,))
    op = Semigroup(HEAT, g)
    sups = [np.max(np.abs(heat_kernel(op, t).values)) * t**0.5 for t in (1, 2, 4, 8)]
    # sup |k_t| <= c1 t^{-d/m} with c1 = (4 pi)^{-1/2}
    assert max(sups) <= (4 * np.pi) ** -0.5 * (1 + 1e-8)


def test_growth_bound_heat_and_shifted():
    g = Grid((512,), (60.0,))
    heat = estimate_growth_bound(Semigroup(HEAT, g), [0.1, 0.5, 1, 2])
    assert heat.M == pytest.approx(1.0, abs=1e-6)
    assert heat.omega <= 1e-6
    assert heat.norms[0] >= 1.0 if heat.t[0] == 0 else True
    shifted = estimate_growth_bound(Semigroup(heat_symbol(1).shifted(1.0), g), [0.1, 0.5, 1, 2])
    assert shifted.omega == pytest.approx(1.0, abs=1e-6)
    assert shifted.omega_plus == pytest.approx(1.0, abs=1e-6)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), t=st.floats(0, 2), s=st.floats(0, 2))
def test_semigroup_law_property(seed, t, s):
    rng = np.random.default_rng(seed)
    g = Grid((64,), (10.0,))
    op = Semigroup(EllipticSymbol.from_coefficients({(2,): 1, (1,): 1j}, 1), g)
    f = rand(g, rng)
    lhs = op.apply(t, op.apply(s, f)).values
    rhs = op.apply(t + s, f).values
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * np.max(np.abs(f.values))

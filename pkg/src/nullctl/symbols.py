"""Constant-coefficient polynomial symbols and their ellipticity constants."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from itertools import product
from typing import Mapping

import numpy as np


class NotElliptic(ValueError):
    """The leading homogeneous part is not strictly positive on the sphere."""


Coefficients = Mapping[tuple[int, ...], complex]


@dataclass(frozen=True)
class SampleSpec:
    """Where the ellipticity inequality is checked.

    ``r_max=None`` picks ``32 * scale`` with ``scale`` a root bound of the
    lower-order coefficients relative to the leading part.
    """

    r_max: float | None = None
    n_radial: int = 4097
    n_directions: int = 64


def _normalize(coeffs: Coefficients, d: int) -> tuple[tuple[tuple[int, ...], complex], ...]:
    out = {}
    for alpha, value in coeffs.items():
        alpha = tuple(int(a) for a in alpha)
        if len(alpha) != d or any(a < 0 for a in alpha):
            raise ValueError(f"bad multi-index {alpha} for d={d}")
        value = complex(value)
        if value != 0:
            out[alpha] = out.get(alpha, 0) + value
    return tuple(sorted((a, v) for a, v in out.items() if v != 0))


def eval_coefficients(terms, xi) -> np.ndarray:
    """Evaluate ``sum a_alpha xi^alpha``; ``xi`` has trailing axis of length d."""
    xi = np.asarray(xi, dtype=float)
    out = np.zeros(xi.shape[:-1], dtype=complex)
    for alpha, value in terms:
        mono = np.ones(xi.shape[:-1])
        for i, a in enumerate(alpha):
            if a:
                mono = mono * xi[..., i] ** a
        out = out + value * mono
    return out


def sphere_directions(d: int, n: int = 64) -> np.ndarray:
    """Deterministic unit vectors covering the sphere in ``d <= 3``."""
    if d == 1:
        return np.array([[1.0], [-1.0]])
    if d == 2:
        th = 2 * np.pi * np.arange(n) / n
        return np.stack([np.cos(th), np.sin(th)], axis=-1)
    if d == 3:
        # Fibonacci lattice plus the coordinate axes
        k = np.arange(n) + 0.5
        z = 1 - 2 * k / n
        phi = np.pi * (1 + 5**0.5) * k
        r = np.sqrt(1 - z**2)
        fib = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=-1)
        return np.concatenate([fib, np.eye(3), -np.eye(3)])
    # higher dimensions: signed coordinate axes and diagonals
    dirs = [np.array(s, dtype=float) for s in product((-1.0, 0.0, 1.0), repeat=d) if any(s)]
    dirs = np.array(dirs)
    return dirs / np.linalg.norm(dirs, axis=1, keepdims=True)


def certify_ellipticity(coeffs: Coefficients, d: int, samples: SampleSpec | None = None) -> tuple[float, float]:
    """Return ``(c, omega)`` with ``Re a(xi) >= c |xi|^m - omega`` on the samples.

    ``c`` is the first value of the ladder ``c_lead * 2**-k`` for which the
    deficit ``c |xi|^m - Re a(xi)`` does not grow on the outermost shell, so
    the bound also holds as ``|xi| -> inf``.  ``omega`` is clipped at 0.
    """
    samples = samples or SampleSpec()
    terms = _normalize(coeffs, d)
    if not terms:
        raise NotElliptic("zero symbol")
    m = max(sum(a) for a, _ in terms)
    if m == 0 or m % 2:
        raise NotElliptic(f"order {m} is not a positive even integer")
    lead = [(a, v) for a, v in terms if sum(a) == m]
    lower = [(a, v) for a, v in terms if sum(a) < m]

    dirs = sphere_directions(d, samples.n_directions)
    c_lead = float(eval_coefficients(lead, dirs).real.min())
    if c_lead <= 0:
        raise NotElliptic(f"leading part has min {c_lead:g} <= 0 on the sphere")

    scale = 1.0
    for alpha, v in lower:
        scale = max(scale, (abs(v) / c_lead) ** (1.0 / (m - sum(alpha))))
    r_max = samples.r_max if samples.r_max is not None else 32.0 * scale
    radii = np.linspace(0.0, r_max, samples.n_radial)
    xi = radii[:, None, None] * dirs[None, :, :]
    re_a = eval_coefficients(terms, xi).real
    rm = radii**m

    for k in range(64):
        c = c_lead * 2.0**-k
        deficit = c * rm[:, None] - re_a
        shell = deficit.max(axis=1)
        tol = 1e-9 * max(1.0, c * rm[-1])
        if shell[-1] <= shell[:-1].max() + tol:
            omega = float(deficit.max())
            # roundoff in the leading-part cancellation
            return c, omega if omega > 1e-3 * tol else 0.0
    raise NotElliptic("no admissible constant on the candidate ladder")


@dataclass(frozen=True)
class EllipticSymbol:
    """Polynomial ``a(xi) = sum a_alpha xi^alpha`` with certified ``(c, omega)``."""

    d: int
    m: int
    terms: tuple[tuple[tuple[int, ...], complex], ...]
    c: float
    omega: float

    @classmethod
    def from_coefficients(cls, coeffs: Coefficients, d: int, samples: SampleSpec | None = None) -> "EllipticSymbol":
        terms = _normalize(coeffs, d)
        c, omega = certify_ellipticity(coeffs, d, samples)
        m = max(sum(a) for a, _ in terms)
        return cls(d, m, terms, c, omega)

    @property
    def coefficients(self) -> dict[tuple[int, ...], complex]:
        return dict(self.terms)

    @property
    def omega_plus(self) -> float:
        return max(self.omega, 0.0)

    def __call__(self, xi) -> np.ndarray:
        return eval_symbol(self, xi)

    def shifted(self, omega_shift: float) -> "EllipticSymbol":
        """``a(xi) - omega_shift``, re-certified."""
        coeffs = self.coefficients
        zero = (0,) * self.d
        coeffs[zero] = coeffs.get(zero, 0) - omega_shift
        return EllipticSymbol.from_coefficients(coeffs, self.d)


def eval_symbol(symbol: EllipticSymbol, xi) -> np.ndarray | complex:
    """Evaluate at one point or an array of points (trailing axis of length d).

    In ``d = 1`` a bare scalar or an array without a trailing axis is accepted.
    """
    xi = np.asarray(xi, dtype=float)
    if symbol.d == 1 and not (xi.ndim >= 2 and xi.shape[-1] == 1):
        xi = xi[..., None]
    scalar = xi.ndim == 1
    out = eval_coefficients(symbol.terms, xi)
    return complex(out) if scalar else out


def adjoint_symbol(symbol: EllipticSymbol) -> EllipticSymbol:
    """Symbol ``a(-xi)``; the ellipticity pair carries over unchanged."""
    terms = tuple((a, v * (-1) ** sum(a)) for a, v in symbol.terms)
    return replace(symbol, terms=terms)


def laplacian_power(d: int, m: int, coef: float = 1.0) -> dict[tuple[int, ...], complex]:
    """Monomial expansion of ``coef * |xi|^m`` for even ``m``."""
    if m % 2:
        raise ValueError("m must be even")
    k = m // 2
    out = {}
    for split in product(range(k + 1), repeat=d):
        if sum(split) != k:
            continue
        mult = math.factorial(k) // math.prod(math.factorial(s) for s in split)
        out[tuple(2 * s for s in split)] = coef * mult
    return out


def heat_symbol(d: int = 1) -> EllipticSymbol:
    return EllipticSymbol.from_coefficients(laplacian_power(d, 2), d)

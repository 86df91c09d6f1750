"""Interior null controls by the dual (HUM) method.

Controls are piecewise constant in time on a knot partition of ``[0, T]``.
On that space the control-to-state map ``B u = int_0^T S_{T-t} 1_E u(t) dt``
is a finite sum of Fourier multipliers, so the Gramian ``B B^*`` is applied
exactly with FFTs and the dual problem is solved by conjugate gradients.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .spectral import Field, Grid, lp_norm, restrict
from .semigroup import Semigroup

log = logging.getLogger(__name__)


class KnotMismatch(ValueError):
    pass


class NoConvergence(RuntimeError):
    def __init__(self, msg, iterations, residual):
        super().__init__(msg)
        self.iterations = iterations
        self.residual = residual


def phi1(z):
    """``(1 - e^{-z}) / z`` with the ``z -> 0`` limit."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1e-8
    zs = np.where(small, 1.0, z)
    return np.where(small, 1 - z / 2 + z**2 / 6, -np.expm1(-zs) / zs)


@dataclass
class ControlSolution:
    grid: Grid
    knots: np.ndarray
    values: np.ndarray
    indicator: np.ndarray
    cost: float = 0.0
    residual: float = 0.0
    iterations: int = 0
    dual_residual: float = 0.0
    p: float = 2.0
    r: float = 2.0
    history: list[float] = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.knots = np.asarray(self.knots, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (len(self.knots) - 1, *self.grid.shape):
            raise KnotMismatch(f"{self.values.shape[0]} control pieces for {len(self.knots) - 1} knot intervals")
        if np.any(np.diff(self.knots) <= 0) or self.knots[0] != 0:
            raise KnotMismatch("knots must start at 0 and increase strictly")

    @classmethod
    def zero(cls, grid: Grid, knots, indicator) -> "ControlSolution":
        knots = np.asarray(knots, dtype=float)
        return cls(grid, knots, np.zeros((len(knots) - 1, *grid.shape), dtype=complex), np.asarray(indicator, float))

    @classmethod
    def constant(cls, grid: Grid, knots, indicator, value: Field) -> "ControlSolution":
        knots = np.asarray(knots, dtype=float)
        vals = np.broadcast_to(value.values * indicator, (len(knots) - 1, *grid.shape)).copy()
        return cls(grid, knots, vals, np.asarray(indicator, float))

    @property
    def T(self) -> float:
        return float(self.knots[-1])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.knots)

    def piece(self, k: int) -> Field:
        return Field(self.grid, self.values[k])

    def scaled(self, s) -> "ControlSolution":
        return ControlSolution(self.grid, self.knots, self.values * s, self.indicator, p=self.p, r=self.r)

    def manifest(self) -> dict:
        return {
            "knots": [float(k) for k in self.knots],
            "p": self.p,
            "r": self.r,
            "cost": self.cost,
            "residual": self.residual,
            "iterations": self.iterations,
            "dual_residual": self.dual_residual,
        }

    def dumps(self) -> str:
        return json.dumps(self.manifest(), sort_keys=True)


def interval_multipliers(op: Semigroup, knots, t: float) -> list[np.ndarray]:
    """``int_{t_k}^{min(t_{k+1}, t)} exp(-(t - s) a) ds`` for every interval starting before ``t``."""
    a = op.a
    out = []
    for lo, hi in zip(knots[:-1], knots[1:]):
        if lo >= t:
            break
        end = min(hi, t)
        dt = end - lo
        out.append(op.multiplier(t - end) * dt * phi1(dt * a))
    return out


def duhamel_evolve(op: Semigroup, x0: Field, control: ControlSolution, t: float) -> Field:
    """Mild solution ``S_t x0 + int_0^t S_{t-s} 1_E u(s) ds``, exact per interval."""
    if control.grid != op.grid or x0.grid != op.grid:
        raise KnotMismatch("control, state and semigroup grids differ")
    if not 0 <= t <= control.T * (1 + 1e-14):
        raise KnotMismatch(f"t = {t} outside [0, {control.T}]")
    acc = op.multiplier(t) * np.fft.fftn(x0.values)
    for k, mult in enumerate(interval_multipliers(op, control.knots, t)):
        acc = acc + mult * np.fft.fftn(control.values[k] * control.indicator)
    return Field(op.grid, np.fft.ifftn(acc))


class ControlMap:
    """``B`` and its L2 adjoint on piecewise-constant controls supported on ``E``."""

    def __init__(self, op: Semigroup, indicator, knots):
        self.op = op
        self.indicator = np.asarray(indicator, dtype=float)
        self.knots = np.asarray(knots, dtype=float)
        self.T = float(self.knots[-1])
        self.widths = np.diff(self.knots)
        self.mults = interval_multipliers(op, self.knots, self.T)

    def forward(self, values: np.ndarray) -> np.ndarray:
        acc = np.zeros(self.op.grid.shape, dtype=complex)
        for mult, u in zip(self.mults, values):
            acc += mult * np.fft.fftn(u * self.indicator)
        return np.fft.ifftn(acc)

    def adjoint(self, phi: np.ndarray) -> np.ndarray:
        ph = np.fft.fftn(phi)
        out = np.empty((len(self.mults), *phi.shape), dtype=complex)
        for k, (mult, w) in enumerate(zip(self.mults, self.widths)):
            out[k] = self.indicator * np.fft.ifftn(np.conj(mult) * ph) / w
        return out

    def gramian(self, phi: np.ndarray) -> np.ndarray:
        """``B B^*`` applied in one frequency-space pass."""
        ph = np.fft.fftn(phi)
        acc = np.zeros_like(ph)
        for mult, w in zip(self.mults, self.widths):
            v = self.indicator * np.fft.ifftn(np.conj(mult) * ph)
            acc += mult * np.fft.fftn(self.indicator * v) / w
        return np.fft.ifftn(acc)


def conjugate_gradient(apply_A, b: np.ndarray, tol: float, max_iter: int, norm=None):
    """Plain CG for a Hermitian positive semidefinite operator.

    Stops once ``norm(b - A x) <= tol``.  Returns ``(x, residual_norm, iterations, history)``.
    """
    norm = norm or (lambda v: float(np.linalg.norm(v)))
    x = np.zeros_like(b)
    r = b.copy()
    d = r.copy()
    rr = np.vdot(r, r).real
    res = norm(r)
    history = [res]
    k = 0
    while res > tol and k < max_iter:
        Ad = apply_A(d)
        alpha = rr / np.vdot(d, Ad).real
        x = x + alpha * d
        r = r - alpha * Ad
        rr_new = np.vdot(r, r).real
        d = r + (rr_new / rr) * d
        rr = rr_new
        k += 1
        res = norm(r)
        history.append(res)
    return x, res, k, history


def synthesize_control_hum(op: Semigroup, indicator, x0: Field, T: float, knots=64, tol: float = 1e-8,
                           eps: float = 0.0, max_iter: int | None = None) -> ControlSolution:
    """Minimal-L2 control steering ``x0`` to (approximately) zero at ``T``.

    Minimizes ``J(phi) = 1/2 ||B^* phi||^2 + eps ||phi||^2 - <phi, S_T x0>``,
    i.e. solves ``(B B^* + 2 eps) phi = S_T x0`` and sets ``u = -B^* phi``.
    The terminal state is then ``x(T) = 2 eps phi + (CG residual)``.
    ``knots`` is either a count of uniform intervals or explicit knots.
    """
    if np.isscalar(knots):
        knots = np.linspace(0.0, T, int(knots) + 1)
    knots = np.asarray(knots, dtype=float)
    if len(knots) - 1 < 16:
        raise KnotMismatch("need at least 16 knot intervals")
    if abs(knots[-1] - T) > 1e-12 * T:
        raise KnotMismatch("last knot must equal T")
    grid = op.grid
    indicator = np.asarray(indicator, dtype=float)
    max_iter = max_iter if max_iter is not None else 10 * (len(knots) - 1)
    h = grid.cell_volume

    cmap = ControlMap(op, indicator, knots)
    target = op.apply(T, x0).values

    def l2(v):
        return float(np.sqrt(h * np.vdot(v, v).real))

    phi, res, iters, history = conjugate_gradient(
        lambda v: cmap.gramian(v) + 2 * eps * v, target, tol, max_iter, norm=l2)
    if res > tol:
        raise NoConvergence(f"CG stopped at residual {res:.3e} > tol {tol:.3e} after {iters} iterations", iters, res)
    values = -cmap.adjoint(phi)
    sol = ControlSolution(grid, knots, values, indicator, iterations=iters, dual_residual=res, history=history)
    xT = duhamel_evolve(op, x0, sol, T)
    sol.residual = lp_norm(xT, 2)
    sol.cost = measure_control_cost(sol, 2, 2)
    log.debug("HUM: %d iterations, dual residual %.3e, |x(T)| %.3e", iters, res, sol.residual)
    return sol


def measure_control_cost(control: ControlSolution, p: float = 2.0, r: float = 2.0) -> float:
    """``||u||_{L_r((0,T); L_p(E))}``, exact for piecewise-constant controls."""
    norms = np.array([lp_norm(restrict(control.piece(k), control.indicator), p) for k in range(len(control.widths))])
    if np.isinf(r):
        return float(norms.max(initial=0.0))
    return float(np.sum(control.widths * norms**r) ** (1.0 / r))

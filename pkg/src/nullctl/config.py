"""Experiment configuration: ``section.key = value`` lines, ``#`` comments.

Example::

    symbol.d = 1
    symbol.terms = 2:1:0          # alpha : Re : Im, terms separated by ';'
    grid.n = 512
    grid.extent = 64
    thick.kind = periodic_slabs
    thick.width = 1
    thick.period = 2
    run.T = 1, 0.5, 0.25
    run.lambdas = 4, 8
    run.t = 0.05:1:20             # start:stop:count, or a comma list
"""
from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .spectral import Grid
from .symbols import EllipticSymbol, NotElliptic
from .thickness import DegenerateParams, ThickSet, generate_thick_set


class ConfigError(ValueError):
    pass


KNOWN_KEYS = {
    "symbol": {"d", "m", "terms"},
    "grid": {"n", "extent"},
    "thick": {"kind", "width", "period", "cell", "density", "L"},
    "run": {"T", "p", "r", "K", "lambdas", "t", "seed", "d2_safety"},
    "probes": {"count", "noise", "lambda"},
    "control": {"knots", "tol", "eps", "max_iter", "x0_width"},
    "output": {"dir"},
}


def parse_lines(text: str) -> dict[str, str]:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        section, _, name = key.partition(".")
        if section not in KNOWN_KEYS or name not in KNOWN_KEYS[section]:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _floats(s: str) -> list[float]:
    s = s.strip()
    if s.count(":") == 2 and "," not in s:
        a, b, n = s.split(":")
        return [float(x) for x in np.linspace(float(a), float(b), int(n))]
    return [_float(x) for x in s.split(",") if x.strip()]


def _float(s: str) -> float:
    s = s.strip().lower()
    if s in ("inf", "infinity"):
        return math.inf
    return float(s)


def parse_terms(s: str, d: int) -> dict[tuple[int, ...], complex]:
    """``"2:1:0; 1:0:1"`` -> ``{(2,): 1, (1,): 1j}``; multi-indices are comma separated."""
    terms = {}
    for chunk in s.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split(":")
        if len(parts) != 3:
            raise ConfigError(f"term {chunk!r}: expected alpha:Re:Im")
        alpha = tuple(int(a) for a in parts[0].split(","))
        if len(alpha) != d:
            raise ConfigError(f"term {chunk!r}: multi-index has {len(alpha)} entries, d = {d}")
        terms[alpha] = terms.get(alpha, 0) + complex(float(parts[1]), float(parts[2]))
    if not terms:
        raise ConfigError("symbol.terms is empty")
    return terms


@dataclass
class ExperimentConfig:
    symbol: EllipticSymbol
    grid: Grid
    thick: ThickSet
    thick_spec: dict
    T: list[float]
    p: float = 2.0
    r: float = 2.0
    K: float = 10.0
    lambdas: list[float] = field(default_factory=lambda: [4.0, 8.0])
    t: list[float] = field(default_factory=lambda: list(np.linspace(0.05, 1, 20)))
    seed: int = 0
    d2_safety: float = 2.0
    probe_count: int = 64
    probe_noise: int = 8
    probe_lambda: float = 8.0
    knots: int = 64
    control_tol: float = 1e-4
    eps: float = 0.0
    max_iter: int | None = None
    x0_width: float = 1.0
    out_dir: Path = Path("out")

    def rng(self, *keys) -> np.random.Generator:
        """Counter-based stream keyed by the seed and a task label."""
        spawn = tuple(zlib.crc32(str(k).encode()) for k in keys)
        return np.random.Generator(np.random.Philox(np.random.SeedSequence(self.seed, spawn_key=spawn)))


def load_config(path, *, seed: int | None = None, out: str | None = None) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from e
    return parse_config(text, seed=seed, out=out)


def parse_config(text: str, *, seed: int | None = None, out: str | None = None) -> ExperimentConfig:
    """Parse and validate everything before any computation starts."""
    kv = parse_lines(text)

    def get(key, default=None, conv=str):
        if key not in kv:
            if default is None:
                raise ConfigError(f"missing required key {key!r}")
            return default
        try:
            return conv(kv[key])
        except (TypeError, ValueError) as e:
            raise ConfigError(f"{key}: {e}") from e

    try:
        d = get("symbol.d", conv=int)
        symbol = EllipticSymbol.from_coefficients(parse_terms(get("symbol.terms"), d), d)
        if "symbol.m" in kv and int(kv["symbol.m"]) != symbol.m:
            raise ConfigError(f"symbol.m = {kv['symbol.m']} but terms have order {symbol.m}")
        n = [int(x) for x in get("grid.n").split(",")]
        ext = _floats(get("grid.extent"))
        if len(n) == 1:
            n = n * d
        if len(ext) == 1:
            ext = ext * d
        grid = Grid(tuple(n), tuple(ext))
        if grid.dim != d:
            raise ConfigError("grid dimension differs from symbol.d")

        kind = get("thick.kind", "periodic_slabs")
        spec = {"kind": kind}
        kw = {}
        for key in ("width", "period", "cell", "density"):
            if f"thick.{key}" in kv:
                kw[key] = get(f"thick.{key}", conv=float)
                spec[key] = kw[key]
        L = _floats(kv["thick.L"]) if "thick.L" in kv else None
        seed_val = seed if seed is not None else get("run.seed", 0, int)
        cfg_rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed_val, spawn_key=(1,))))
        thick = generate_thick_set(kind, grid, L, rng=cfg_rng, **kw)

        cfg = ExperimentConfig(
            symbol=symbol, grid=grid, thick=thick, thick_spec=spec,
            T=sorted(_floats(get("run.T", "1"))),
            p=get("run.p", 2.0, _float), r=get("run.r", 2.0, _float), K=get("run.K", 10.0, float),
            lambdas=_floats(get("run.lambdas", "4, 8")), t=_floats(get("run.t", "0.05:1:20")),
            seed=seed_val, d2_safety=get("run.d2_safety", 2.0, float),
            probe_count=get("probes.count", 64, int), probe_noise=get("probes.noise", 8, int),
            probe_lambda=get("probes.lambda", 8.0, float),
            knots=get("control.knots", 64, int), control_tol=get("control.tol", 1e-4, float),
            eps=get("control.eps", 0.0, float),
            max_iter=get("control.max_iter", 0, int) or None,
            x0_width=get("control.x0_width", 1.0, float),
            out_dir=Path(out if out is not None else get("output.dir", "out")),
        )
    except (NotElliptic, DegenerateParams, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(str(e)) from e
    if any(T <= 0 for T in cfg.T):
        raise ConfigError("run.T must be positive")
    if not (cfg.p >= 1 and cfg.r >= 1):
        raise ConfigError("run.p and run.r must be >= 1")
    if any(t <= 0 for t in cfg.t):
        raise ConfigError("run.t must be positive")
    if cfg.K < 1:
        raise ConfigError("run.K must be >= 1")
    return cfg

"""Command-line experiment runner.

Every subcommand appends JSON records (one object per line) to
``<out>/<subcommand>.jsonl``; ``report`` merges them into ``summary.csv`` and
``summary.json``.  Exit status: 0 all checks passed, 1 a verification failed
(details in ``failures.jsonl``), 2 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig, load_config
from .control import NoConvergence, synthesize_control_hum
from .fieldio import write_field
from .observability import (compute_parabolic_cobs, measure_observability_ratio,
                            verify_iteration_inequality)
from .projector import dissipation_probes, lambda_threshold, measure_dissipation_general
from .semigroup import FitFailed, Semigroup, estimate_growth_bound, heat_kernel, verify_kernel_bound
from .spectral import lp_norm
from .thickness import band_limited_probes, measure_ls_constant

log = logging.getLogger("nullctl")

SUBCOMMANDS = ("certify", "evolve", "verify-kernel", "verify-dissipation", "verify-uncertainty",
               "estimate-cobs", "verify-iteration", "synthesize-control", "report")


def _clean(x):
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return x


def dumps(record: dict) -> str:
    return json.dumps(_clean(record), sort_keys=True)


class Run:
    def __init__(self, cfg: ExperimentConfig, threads: int = 1):
        self.cfg = cfg
        self.threads = max(1, threads)
        self.op = Semigroup(cfg.symbol, cfg.grid)
        cfg.out_dir.mkdir(parents=True, exist_ok=True)

    def map(self, fn, items):
        items = list(items)
        if self.threads == 1:
            return [fn(x) for x in items]
        with ThreadPoolExecutor(self.threads) as ex:
            return list(ex.map(fn, items))

    def write(self, name: str, records: list[dict]):
        path = self.cfg.out_dir / f"{name}.jsonl"
        with path.open("w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(dumps({"subcommand": name, **rec}) + "\n")

    def fail(self, name: str, reason: str, **extra):
        path = self.cfg.out_dir / "failures.jsonl"
        with path.open("a", encoding="utf-8") as fh:
            fh.write(dumps({"subcommand": name, "reason": reason, **extra}) + "\n")

    # shared pieces

    def d2_fit(self) -> float:
        """Fitted dissipation prefactor at the smallest admissible ladder lambda."""
        cfg = self.cfg
        lam_star = lambda_threshold(cfg.symbol)
        lams = [lam for lam in cfg.lambdas if lam > lam_star]
        if not lams:
            raise ConfigError(f"no lambda in run.lambdas exceeds lambda* = {lam_star:g}")
        probes = dissipation_probes(cfg.grid, lams[0], cfg.rng("dissipation", lams[0]), cfg.probe_noise)
        half = [t for t in cfg.t if t <= max(cfg.T) / 2] or cfg.t
        return measure_dissipation_general(cfg.symbol, lams[0], half, probes, p=cfg.p).prefactor_fit

    def obs_probes(self, key="observability"):
        cfg = self.cfg
        return band_limited_probes(cfg.grid, cfg.probe_lambda, cfg.probe_count - 1, cfg.rng(key),
                                   avoid=cfg.thick.indicator)

    def x0(self):
        w = self.cfg.x0_width
        return self.cfg.grid.sample(lambda *xs: np.exp(-sum(x**2 for x in xs) / (2 * w**2)))


def cmd_certify(run: Run) -> bool:
    s = run.cfg.symbol
    run.write("certify", [{"d": s.d, "m": s.m, "c": s.c, "omega": s.omega,
                           "terms": [[list(a), v.real, v.imag] for a, v in s.terms], "pass": True}])
    return True


def cmd_evolve(run: Run) -> bool:
    cfg = run.cfg
    x0 = run.x0()
    out = cfg.out_dir / "fields"
    out.mkdir(exist_ok=True)
    write_field(out / "x0.pfld", x0)
    records = []
    for T in cfg.T:
        xT = run.op.apply(T, x0)
        write_field(out / f"evolved_T{T:g}.pfld", xT)
        write_field(out / f"kernel_T{T:g}.pfld", heat_kernel(run.op, T))
        records.append({"T": T, "norm_in": lp_norm(x0, cfg.p), "norm_out": lp_norm(xT, cfg.p), "pass": True})
    run.write("evolve", records)
    return True


def cmd_verify_kernel(run: Run) -> bool:
    try:
        fit = verify_kernel_bound(run.op, run.cfg.t)
    except FitFailed as e:
        run.fail("verify-kernel", str(e))
        return False
    run.write("verify-kernel", [{**r, "pass": fit.passed} for r in fit.records])
    return fit.passed


def cmd_verify_dissipation(run: Run) -> bool:
    cfg = run.cfg
    lam_star = lambda_threshold(cfg.symbol)

    def one(lam):
        if lam <= lam_star:
            return {"lambda": lam, "lambda_star": lam_star, "pass": False, "reason": "lambda <= lambda*"}
        probes = dissipation_probes(cfg.grid, lam, cfg.rng("dissipation", lam), cfg.probe_noise)
        rep = measure_dissipation_general(cfg.symbol, lam, cfg.t, probes, p=cfg.p)
        return {**rep.to_json(), "lambda_star": lam_star, "m": cfg.symbol.m}

    records = sorted(run.map(one, cfg.lambdas), key=lambda r: r["lambda"])
    run.write("verify-dissipation", records)
    ok = all(r["pass"] for r in records)
    if not ok:
        run.fail("verify-dissipation", "slope or prefactor check failed",
                 lambdas=[r["lambda"] for r in records if not r["pass"]])
    return ok


def cmd_verify_uncertainty(run: Run) -> bool:
    cfg = run.cfg
    th = cfg.thick

    def one(lam):
        probes = band_limited_probes(cfg.grid, lam, cfg.probe_count - 1, cfg.rng("uncertainty", lam),
                                     avoid=th.indicator)
        res = measure_ls_constant(th, lam, cfg.p, probes, cfg.K)
        return {"rho": th.rho, "L1": th.L1, "lambda": lam, "p": cfg.p, "C_emp": res.C_emp,
                "prediction": res.prediction, "log_prediction": res.log_prediction, "pass": res.passed}

    records = sorted(run.map(one, cfg.lambdas), key=lambda r: r["lambda"])
    run.write("verify-uncertainty", records)
    cols = ["rho", "L1", "lambda", "p", "C_emp", "prediction", "pass"]
    _write_csv(cfg.out_dir / "uncertainty.csv", cols, records)
    ok = all(r["pass"] for r in records)
    if not ok:
        run.fail("verify-uncertainty", "C_emp exceeded d0 exp(d1 lambda)")
    return ok


def _cobs_records(run: Run) -> list[dict]:
    cfg = run.cfg
    d2 = run.d2_fit()
    growth = estimate_growth_bound(run.op, np.linspace(0, max(cfg.T), 9)[1:])
    probes = run.obs_probes()

    def one(T):
        c = compute_parabolic_cobs(cfg.symbol, cfg.thick, T, cfg.p, cfg.r, cfg.K, d2, growth, cfg.d2_safety)
        obs = measure_observability_ratio(run.op, cfg.thick, T, cfg.p, cfg.r, probes)
        rec = {"T": T, "rho": cfg.thick.rho, "L1": cfg.thick.L1, "lambda_star": c.lam_star, "C1": c.C1,
               "C2": c.C2, "C3": c.C3, "C_obs": c.C_obs, "log_C1": c.log_C1, "log_C_obs": c.log_C_obs,
               "C_emp": obs.C_emp, "m": cfg.symbol.m, "d0": c.d0, "log_d0": c.log_d0, "d1": c.d1, "d2": c.d2,
               "d3": c.d3, "M": c.M, "omega": c.omega, "r": cfg.r, "p": cfg.p, "K": cfg.K,
               "richardson_ok": obs.richardson_ok, "pass": bool(math.log(obs.C_emp) <= c.log_C_obs)}
        return rec

    return sorted(run.map(one, cfg.T), key=lambda r: r["T"])


def cmd_estimate_cobs(run: Run) -> bool:
    records = _cobs_records(run)
    run.write("estimate-cobs", records)
    cols = ["T", "rho", "L1", "lambda_star", "C1", "C2", "C3", "C_obs", "C_emp", "pass"]
    _write_csv(run.cfg.out_dir / "cobs.csv", cols, records)
    ok = all(r["pass"] for r in records)
    if not ok:
        run.fail("estimate-cobs", "C_emp exceeded C_obs; K may be uncalibrated")
    return ok


def cmd_verify_iteration(run: Run) -> bool:
    cfg = run.cfg
    d2 = run.d2_fit()
    T = max(cfg.T)
    consts = compute_parabolic_cobs(cfg.symbol, cfg.thick, T, cfg.p, cfg.r, cfg.K, d2, None, cfg.d2_safety)
    probes = run.obs_probes("iteration")[:16]
    t_grid = np.linspace(T / 32, T, 32)
    records = []
    for lam in cfg.lambdas:
        if lam <= consts.lam_star:
            continue
        rep = verify_iteration_inequality(run.op, cfg.thick, lam, t_grid, probes, consts, cfg.p)
        records.append(rep.to_json())
    run.write("verify-iteration", records)
    ok = bool(records) and all(r["pass"] for r in records)
    if not ok:
        run.fail("verify-iteration", "one-step inequality violated or no admissible lambda")
    return ok


def cmd_synthesize_control(run: Run) -> bool:
    cfg = run.cfg
    x0 = run.x0()
    n0 = lp_norm(x0, 2)
    d2 = run.d2_fit()
    records = []
    ok = True
    for T in cfg.T:
        try:
            sol = synthesize_control_hum(run.op, cfg.thick.indicator, x0, T, cfg.knots, cfg.control_tol * n0,
                                         cfg.eps, cfg.max_iter)
        except NoConvergence as e:
            run.fail("synthesize-control", str(e), T=T, iterations=e.iterations, residual=e.residual)
            ok = False
            continue
        # cost is measured in L2(0,T; L2(E)), the dual exponent is r' = 2
        c = compute_parabolic_cobs(cfg.symbol, cfg.thick, T, 2.0, 2.0, cfg.K, d2, None, cfg.d2_safety)
        cdir = cfg.out_dir / f"control_T{T:g}"
        cdir.mkdir(exist_ok=True)
        for k in range(len(sol.widths)):
            write_field(cdir / f"u_{k:04d}.pfld", sol.piece(k))
        (cdir / "manifest.json").write_text(sol.dumps() + "\n", encoding="utf-8")
        passed = bool(sol.residual <= cfg.control_tol * n0 * (1 + 1e-9)
                      and math.log(max(sol.cost, 1e-300)) <= c.log_C_obs + math.log(n0))
        ok &= passed
        records.append({"T": T, **sol.manifest(), "norm_x0": n0, "log_C_obs": c.log_C_obs, "eps": cfg.eps,
                        "pass": passed})
    run.write("synthesize-control", records)
    return ok


def _write_csv(path: Path, cols: list[str], records: list[dict]):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in records:
        w.writerow([_csv_cell(r.get(c)) for c in cols])
    path.write_text(buf.getvalue(), encoding="utf-8")


def _csv_cell(v):
    v = _clean(v)
    if isinstance(v, (list, dict)):
        return json.dumps(v, sort_keys=True)
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else v


LEAD_COLUMNS = ["subcommand", "T", "lambda", "t", "rho", "L1", "p", "r", "m", "pass"]
SORT_KEYS = ["subcommand", "T", "lambda", "t"]


def emit_report(out_dir) -> tuple[Path, Path]:
    """Merge every ``*.jsonl`` record into ``summary.csv`` / ``summary.json``.

    Rows are sorted by (subcommand, T, lambda, t); columns are the lead set
    followed by the remaining keys alphabetically.  Adds ``inv_T_pow``
    (``T^{-1/(m-1)}``) next to ``log_C_obs`` and writes per-``t`` dissipation
    curves to ``dissipation_curves.csv``.
    """
    out_dir = Path(out_dir)
    records = []
    for path in sorted(out_dir.glob("*.jsonl")):
        if path.name == "failures.jsonl":
            continue
        for line in path.read_text(encoding="utf-8").splitlines():
            if line.strip():
                records.append(json.loads(line))
    if not records:
        raise FileNotFoundError(f"no run artifacts in {out_dir}")
    curves = []
    for rec in records:
        if "log_C_obs" in rec and "T" in rec and rec.get("m", 0) > 1:
            rec["inv_T_pow"] = rec["T"] ** (-1.0 / (rec["m"] - 1))
        if rec.get("subcommand") == "verify-dissipation" and rec.get("t"):
            for t, ratio in zip(rec["t"], rec["ratios"]):
                curves.append({"lambda": rec["lambda"], "t": t, "ratio": ratio,
                               "log_ratio": math.log(ratio) if ratio > 0 else None,
                               "log_bound": math.log(rec["prefactor_fit"]) - rec["rate_theoretical"] * t})

    def key(r):
        return tuple((0, r[k]) if isinstance(r.get(k), (int, float)) else (1, str(r.get(k, ""))) for k in SORT_KEYS)

    records.sort(key=key)
    keys = set().union(*records)
    cols = [c for c in LEAD_COLUMNS if c in keys] + sorted(keys - set(LEAD_COLUMNS))
    _write_csv(out_dir / "summary.csv", cols, records)
    (out_dir / "summary.json").write_text(
        json.dumps({"columns": cols, "rows": _clean(records)}, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    if curves:
        curves.sort(key=lambda r: (r["lambda"], r["t"]))
        _write_csv(out_dir / "dissipation_curves.csv", ["lambda", "t", "ratio", "log_ratio", "log_bound"], curves)
    return out_dir / "summary.csv", out_dir / "summary.json"


COMMANDS = {
    "certify": cmd_certify,
    "evolve": cmd_evolve,
    "verify-kernel": cmd_verify_kernel,
    "verify-dissipation": cmd_verify_dissipation,
    "verify-uncertainty": cmd_verify_uncertainty,
    "estimate-cobs": cmd_estimate_cobs,
    "verify-iteration": cmd_verify_iteration,
    "synthesize-control": cmd_synthesize_control,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nullctl", description="Spectral observability / null-control experiments.")
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", type=Path, help="experiment config (key = value lines)")
    ap.add_argument("--seed", type=int, default=None, help="64-bit seed (overrides run.seed)")
    ap.add_argument("--out", default=None, help="output directory (overrides output.dir)")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")

    if args.subcommand == "report":
        out = args.out
        if out is None and args.config is not None:
            try:
                out = load_config(args.config).out_dir
            except ConfigError as e:
                print(f"config error: {e}", file=sys.stderr)
                return 2
        try:
            csv_path, _ = emit_report(out or "out")
        except FileNotFoundError as e:
            print(str(e), file=sys.stderr)
            return 1
        print(csv_path)
        return 0

    if args.config is None:
        ap.print_usage(sys.stderr)
        print("nullctl: error: --config is required", file=sys.stderr)
        return 2
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("config error: --seed must fit in 64 bits", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config, seed=args.seed, out=args.out)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    run = Run(cfg, args.threads)
    try:
        ok = COMMANDS[args.subcommand](run)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())

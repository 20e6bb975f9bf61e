"""Command-line driver.

    lubrisurf simulate --config CONFIG --out DIR [--seed N] [--quiet]
    lubrisurf linstab  --config CONFIG --out DIR [--quiet]
    lubrisurf compare  --run DIR --linstab DIR [--quiet]
    lubrisurf sweep    --config SWEEP --out DIR [--seed N] [--quiet]

Exit codes: 0 clean finish, 1 configuration error, 2 positivity-loss halt,
3 non-finite halt, 4 eigensolver non-convergence.
"""
from __future__ import annotations

import argparse
import copy
import csv
import io
import itertools
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import artifacts
from . import diagnostics as diag
from .config import atomic_write_text, config_from_dict, load_config
from .errors import ConfigError, ConvergenceError
from .integrate import run
from .linstab import (assemble_linearized, bq_is_positive_definite, bq_matrix,
                      q_admissible_max, spectrum)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_POSITIVITY = 2
EXIT_NONFINITE = 3
EXIT_EIGEN = 4

HALT_EXIT = {"t_end": EXIT_OK, "steady": EXIT_OK, "max_steps": EXIT_OK,
             "positivity_loss": EXIT_POSITIVITY, "non_finite": EXIT_NONFINITE}

SWEEP_MAX_RUNS = 256
RATIO_BAND = (0.8, 1.2)


def _say(quiet, msg):
    if not quiet:
        print(msg, file=sys.stderr, flush=True)


# ---------------------------------------------------------------- simulate

def simulate(cfg, out_dir, quiet=True):
    """Run one simulation and write its artifacts. Returns (exit_code, trace, final_state)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    state0 = cfg.initial_state()
    grid = cfg.grid
    snap_dir = out / "snapshots"
    snaps = []

    def on_sample(state, k):
        if cfg.snapshot_every and k % cfg.snapshot_every == 0:
            path = snap_dir / f"{len(snaps):04d}.csv"
            artifacts.write_snapshot(path, state, cfg.params, grid.centers)
            snaps.append({"file": path.name, "t": state.t})
            _say(quiet, f"  t={state.t:.6g} snapshot {path.name}")

    trace, final = run(state0, cfg.params, cfg.integrator, on_sample=on_sample)
    last = trace.n_samples - 1
    if cfg.snapshot_every and last % cfg.snapshot_every != 0:
        path = snap_dir / f"{len(snaps):04d}.csv"
        artifacts.write_snapshot(path, final, cfg.params, grid.centers)
        snaps.append({"file": path.name, "t": final.t})

    artifacts.write_trace(out / "trace.csv", trace)
    code = HALT_EXIT[trace.halt_reason]
    verdict = diag.classify_steady(final, cfg.params, cfg.classify_tol)
    manifest = {
        "config": cfg.to_dict(),
        "versions": artifacts.versions(),
        "halt_reason": trace.halt_reason,
        "halt_detail": trace.halt_detail,
        "exit_code": code,
        "accepted_steps": trace.accepted,
        "rejected_steps": trace.rejected,
        "t_final": final.t,
        "n_samples": trace.n_samples,
        "snapshots": snaps,
        "equilibrium": trace.equilibrium.to_dict(),
        "steady_verdict": {"kind": verdict.kind.value, "h": verdict.h, "m": verdict.m,
                           "gamma": verdict.gamma},
        "error": None,
    }
    artifacts.write_json(out / "manifest.json", manifest)
    _say(quiet, f"simulate: {trace.halt_reason} at t={final.t:.6g} after "
                f"{trace.accepted} steps ({trace.rejected} rejected) -> exit {code}")
    return code, trace, final


def cmd_simulate(config_path, out_dir, seed=None, quiet=False):
    try:
        cfg = load_config(config_path, seed=seed)
        code, _, _ = simulate(cfg, out_dir, quiet)
        return code
    except ConfigError as exc:
        _write_error(out_dir, exc)
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def _write_error(out_dir, exc):
    try:
        artifacts.write_json(Path(out_dir) / "manifest.json",
                             {"error": str(exc), "error_type": type(exc).__name__,
                              "exit_code": EXIT_CONFIG, "versions": artifacts.versions()})
    except OSError:
        pass


# ---------------------------------------------------------------- linstab

def linstab_report(cfg, with_spectrum=True):
    params = cfg.params
    eq = cfg.equilibrium()
    q_max = q_admissible_max(params)
    report = {
        "params": params.to_dict(),
        "n_cells": cfg.n_cells,
        "equilibrium": eq.to_dict(),
        "q_max": q_max,
        "q_max_unbounded": math.isinf(q_max),
        "bq": [],
        "bq_note": "",
        "spectral_bound": None,
        "omega0_num": None,
        "slowest_eigenvalues": [],
        "decay_comparison": None,
    }
    if math.isinf(q_max):
        report["bq_note"] = "sigma'(0) = 0: q is unbounded, b_q check skipped"
    else:
        qs = [(float(f), float(f) * q_max) for f in cfg.linstab.get("q_fractions", [])]
        qs += [(float(q) / q_max, float(q)) for q in cfg.linstab.get("q_values", [])]
        for frac, q in qs:
            cert = bq_is_positive_definite(bq_matrix(q, eq, params))
            report["bq"].append({"q": q, "q_fraction": frac,
                                 "eigenvalues": cert.eigenvalues,
                                 "positive_definite": cert.positive_definite,
                                 "minors": cert.minors, "failing_minor": cert.failing_minor,
                                 "note": cert.note})
    if with_spectrum:
        op = assemble_linearized(cfg.grid, params, eq)
        spec = spectrum(op)
        report["spectral_bound"] = spec.spectral_bound
        report["omega0_num"] = spec.omega0
        report["slowest_eigenvalues"] = [[z.real, z.imag] for z in spec.slowest(8)]
    return report


def cmd_linstab(config_path, out_dir, quiet=False):
    try:
        cfg = load_config(config_path)
        report = linstab_report(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"eigensolver failure: {exc}", file=sys.stderr)
        return EXIT_EIGEN
    artifacts.write_json(Path(out_dir) / "linstab.json", report)
    _say(quiet, f"linstab: q_max={report['q_max']}, spectral bound={report['spectral_bound']}")
    return EXIT_OK


# ---------------------------------------------------------------- compare

def compare_decay(times, norms, spectral_bound, scale=1.0):
    """Fit the late-time decay and set it against the spectral gap. Asserts nothing."""
    rep = {"omega_fit": None, "r_squared": None, "window": None,
           "omega0_num": None, "spectral_bound": spectral_bound, "ratio": None,
           "insufficient_tail": False, "decaying": None, "spectrally_stable": None,
           "consistent": None, "within_band": None, "band": list(RATIO_BAND)}
    if spectral_bound is not None:
        rep["spectrally_stable"] = spectral_bound < 0
        rep["omega0_num"] = -spectral_bound if spectral_bound < 0 else None
    win = diag.tail_window(times, norms, scale)
    if win is None:
        rep["insufficient_tail"] = True
        return rep
    t = np.asarray(times)
    sel = (t >= win[0]) & (t <= win[1])
    omega, r2 = diag.fit_decay_series(t[sel], np.asarray(norms)[sel])
    rep.update(omega_fit=omega, r_squared=r2, window=list(win), decaying=omega > 0)
    if rep["spectrally_stable"] is not None:
        rep["consistent"] = rep["decaying"] == rep["spectrally_stable"]
    if rep["omega0_num"]:
        rep["ratio"] = omega / rep["omega0_num"]
        rep["within_band"] = RATIO_BAND[0] <= rep["ratio"] <= RATIO_BAND[1]
    return rep


def cmd_compare(run_dir, linstab_dir, quiet=False):
    run_dir, linstab_dir = Path(run_dir), Path(linstab_dir)
    try:
        manifest = artifacts.read_json(run_dir / "manifest.json")
        lin = artifacts.read_json(linstab_dir / "linstab.json")
        tr = artifacts.read_csv(run_dir / "trace.csv")
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"cannot read artifacts: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    cfg = manifest.get("config", {})
    if cfg.get("params") != lin.get("params") or cfg.get("grid", {}).get("n_cells") != lin.get("n_cells"):
        print("parameter mismatch between run and linstab artifacts", file=sys.stderr)
        return EXIT_CONFIG
    norms = np.sqrt(tr["l2_h"] ** 2 + tr["l2_m"] ** 2 + tr["l2_gamma"] ** 2)
    eq = manifest.get("equilibrium", {})
    scale = math.sqrt(cfg["params"]["L"]) * (eq.get("h_star", 1.0) + eq.get("eta_star", 0.0))
    rep = compare_decay(tr["t"], norms, lin.get("spectral_bound"), scale)
    lin["decay_comparison"] = rep
    artifacts.write_json(linstab_dir / "linstab.json", lin)
    artifacts.write_json(run_dir / "comparison.json", rep)
    if not quiet:
        print(json.dumps(artifacts._clean(rep), indent=2))
    return EXIT_OK


# ---------------------------------------------------------------- sweep

def _set_path(d, dotted, value):
    keys = dotted.split(".")
    cur = d
    for k in keys[:-1]:
        cur = cur.setdefault(k, {})
        if not isinstance(cur, dict):
            raise ConfigError(f"sweep key {dotted!r} does not address a config entry")
    cur[keys[-1]] = value


def expand_sweep(sweep, seed=None):
    """Cartesian product of the sweep grid applied to the base config."""
    if not isinstance(sweep, dict) or "grid" not in sweep:
        raise ConfigError("sweep config needs a 'grid' mapping of dotted keys to value lists")
    base = sweep.get("base", {})
    grid = sweep["grid"]
    keys = list(grid)
    for k in keys:
        if not isinstance(grid[k], list) or not grid[k]:
            raise ConfigError(f"sweep values for {k!r} must be a non-empty list")
    cap = int(sweep.get("max_runs", SWEEP_MAX_RUNS))
    total = math.prod(len(grid[k]) for k in keys)
    if total > cap:
        raise ConfigError(f"sweep has {total} runs, cap is {cap}")
    runs = []
    for combo in itertools.product(*(grid[k] for k in keys)):
        cfg = copy.deepcopy(base)
        for k, v in zip(keys, combo):
            _set_path(cfg, k, v)
        if seed is not None:
            cfg["seed"] = int(seed)
        runs.append((dict(zip(keys, combo)), cfg))
    return keys, runs


def _sweep_one(job):
    index, values, cfg_dict, base_dir, out_dir, want_linstab = job
    row = dict(values)
    row.update(halt_reason="", verdict="", omega_fit=math.nan, omega0_num=math.nan,
               max_mass_drift=math.nan, max_energy_increase=math.nan)
    run_dir = Path(out_dir) / f"run_{index:04d}"
    try:
        cfg = config_from_dict(cfg_dict, base_dir=base_dir)
        try:
            cfg.initial_state()
        except ConfigError as exc:
            row["halt_reason"] = "invalid_initial_state"
            _write_error(run_dir, exc)
            return row
        _, trace, final = simulate(cfg, run_dir, quiet=True)
        a = trace.arrays()
        drift = max(np.max(np.abs(a[k] - a[k][0])) / abs(a[k][0])
                    for k in ("fluid_mass", "surfactant_mass"))
        e = a["energy"]
        row["halt_reason"] = trace.halt_reason
        row["verdict"] = diag.classify_steady(final, cfg.params, cfg.classify_tol).kind.value
        row["max_mass_drift"] = float(drift)
        row["max_energy_increase"] = float(max(0.0, np.max(np.diff(e)))) if e.size > 1 else 0.0
        eq = trace.equilibrium
        scale = math.sqrt(cfg.params.L) * (eq.h_star + eq.eta_star)
        bound = None
        if want_linstab:
            rep = linstab_report(cfg)
            artifacts.write_json(run_dir / "linstab.json", rep)
            bound = rep["spectral_bound"]
            row["omega0_num"] = rep["omega0_num"] if rep["omega0_num"] is not None else math.nan
        cmp = compare_decay(a["t"], diag.trace_norm(trace), bound, scale)
        if cmp["omega_fit"] is not None:
            row["omega_fit"] = cmp["omega_fit"]
    except ConfigError as exc:
        row["halt_reason"] = "config_error"
        _write_error(run_dir, exc)
    except ConvergenceError:
        row["halt_reason"] = row["halt_reason"] or "eigensolver_failure"
    return row


def _workers(n_jobs):
    env = os.environ.get("LUBRISURF_THREADS")
    n = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(n, n_jobs))


def cmd_sweep(config_path, out_dir, seed=None, quiet=False):
    config_path = Path(config_path)
    try:
        with open(config_path) as fh:
            sweep = json.load(fh)
        keys, runs = expand_sweep(sweep, seed)
        base_dir = config_path.parent.resolve()
        # validate the base config up front; per-run problems are reported per row
        config_from_dict(copy.deepcopy(sweep.get("base", {})), base_dir=base_dir)
    except (OSError, json.JSONDecodeError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    want_linstab = bool(sweep.get("linstab", True))
    jobs = [(i, vals, cfg, base_dir, str(out), want_linstab) for i, (vals, cfg) in enumerate(runs)]
    workers = _workers(len(jobs))
    _say(quiet, f"sweep: {len(jobs)} runs on {workers} worker(s)")
    if workers == 1:
        rows = [_sweep_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_one, jobs))
    columns = keys + ["halt_reason", "verdict", "omega_fit", "omega0_num",
                      "max_mass_drift", "max_energy_increase"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in columns])
    atomic_write_text(out / "summary.csv", buf.getvalue())
    _say(quiet, f"sweep: wrote {out / 'summary.csv'}")
    return EXIT_OK


def _fmt(v):
    if isinstance(v, float):
        return artifacts.FLOAT_FMT % v
    if isinstance(v, (dict, list)):
        return json.dumps(v, sort_keys=True)
    return v


# ---------------------------------------------------------------- entry point

def build_parser():
    p = argparse.ArgumentParser(prog="lubrisurf", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="integrate the film/surfactant system")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--quiet", action="store_true")

    s = sub.add_parser("linstab", help="linear stability report of the equilibrium")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--quiet", action="store_true")

    s = sub.add_parser("compare", help="fitted decay rate vs spectral gap")
    s.add_argument("--run", required=True)
    s.add_argument("--linstab", required=True)
    s.add_argument("--quiet", action="store_true")

    s = sub.add_parser("sweep", help="cartesian parameter sweep")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--quiet", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "simulate":
        return cmd_simulate(args.config, args.out, args.seed, args.quiet)
    if args.command == "linstab":
        return cmd_linstab(args.config, args.out, args.quiet)
    if args.command == "compare":
        return cmd_compare(args.run, args.linstab, args.quiet)
    return cmd_sweep(args.config, args.out, args.seed, args.quiet)


if __name__ == "__main__":
    sys.exit(main())

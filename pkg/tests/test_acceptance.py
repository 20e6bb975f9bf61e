"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` or directly as a script; the
criterion lines are repeated in the pytest terminal summary.
"""
import json
import math
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

from lubrisurf import cli
from lubrisurf import diagnostics as diag
from lubrisurf.config import config_from_dict
from lubrisurf.discretize import rhs_stacked
from lubrisurf.integrate import IntegratorConfig, run
from lubrisurf.linstab import (assemble_linearized, bq_is_positive_definite, bq_matrix,
                               equilibrium_from, q_admissible_max, spectrum)
from lubrisurf.model import Grid, State, SurfaceTensionLaw

_LINES = []


def report(number, ok, detail, elapsed):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {detail} ({elapsed:.1f}s)"
    _LINES.append(line)
    print(line)
    assert ok, line


_CACHE = {}


def default_long_run():
    """Default configuration run to t_end = 50 (stops early once steady)."""
    if "long" not in _CACHE:
        cfg = config_from_dict({"integrator": {"t_end": 50.0}})
        s0 = cfg.initial_state()
        t0 = time.perf_counter()
        trace, final = run(s0, cfg.params, cfg.integrator)
        _CACHE["long"] = (cfg, s0, trace, final, time.perf_counter() - t0)
    return _CACHE["long"]


def default_spectrum():
    if "spec" not in _CACHE:
        cfg = config_from_dict({})
        op = assemble_linearized(cfg.grid, cfg.params, cfg.equilibrium())
        _CACHE["spec"] = spectrum(op)
    return _CACHE["spec"]


def test_criterion_01_mass_conservation():
    t0 = time.perf_counter()
    cfg = config_from_dict({"integrator": {"t_end": 1e6, "max_steps": 10_000}})
    trace, final = run(cfg.initial_state(), cfg.params, cfg.integrator)
    a = trace.arrays()
    drift = {k: float(np.max(np.abs(a[k] - a[k][0])) / abs(a[k][0]))
             for k in ("fluid_mass", "surfactant_mass")}
    ok = trace.accepted == 10_000 and all(d <= 1e-12 for d in drift.values())
    report(1, ok, f"{trace.accepted} steps, fluid drift {drift['fluid_mass']:.2e}, "
                  f"surfactant drift {drift['surfactant_mass']:.2e} (<= 1e-12)",
           time.perf_counter() - t0)


def test_criterion_02_energy_dissipation():
    cfg, s0, trace, final, elapsed = default_long_run()
    a = trace.arrays()
    e = a["energy"]
    scale = abs(e[0])
    max_increase = float(np.max(np.diff(e)))
    min_diss = float(np.min(a["dissipation"] / np.maximum(1.0, np.abs(e))[:, None]))
    ok = max_increase <= 1e-9 * scale and min_diss >= -1e-12
    report(2, ok, f"max energy increase {max_increase:.2e} (<= {1e-9 * scale:.2e}), "
                  f"min scaled dissipation {min_diss:.2e} (>= -1e-12)", elapsed)


def _residual_run(n, dt, T=0.5):
    p = config_from_dict({}).params
    eq = equilibrium_from(1.0, 0.01, p)
    c = np.cos(np.pi * Grid(n, p.L).centers / p.L)
    s0 = State(1.0 + 1e-2 * c, eq.m_star + 1e-3 * c, eq.gamma_star + 1e-3 * c)
    icfg = IntegratorConfig(scheme="rk2", dt_init=dt, dt_max=dt, t_end=T,
                            sample_interval=4 * dt, steady_tol=1e-14)
    trace, _ = run(s0, p, icfg)
    return float(np.max(np.abs(diag.energy_residual(trace))))


def test_criterion_03_residual_refinement():
    t0 = time.perf_counter()
    dt0 = 2e-4
    res = [_residual_run(n, dt0 / 2 ** i) for i, n in enumerate((32, 64, 128))]
    order = math.log(res[0] / res[2]) / math.log(4.0)
    ok = res[0] > res[1] > res[2] and order >= 1.0
    report(3, ok, "max |residual| " + ", ".join(f"{r:.2e}" for r in res)
           + f", observed order {order:.2f} (>= 1, monotone)", time.perf_counter() - t0)


def test_criterion_04_steady_state():
    cfg, s0, trace, final, elapsed = default_long_run()
    v = diag.classify_steady(final, cfg.params, 1e-8)
    eq = cfg.equilibrium()
    gap = abs(cfg.params.beta * v.m - v.h * v.gamma) if not math.isnan(v.h) else math.inf
    dh = abs(v.h - float(np.mean(s0.h)))
    deta = abs(v.m + v.gamma - eq.eta_star)
    ok = (v.kind is diag.SteadyKind.STEADY_CONSTANT and gap <= 1e-8
          and dh <= 1e-10 and deta <= 1e-10)
    report(4, ok, f"{v.kind.value} at t={final.t:.3g} ({trace.halt_reason}), "
                  f"|beta m - h gamma| {gap:.1e}, |h - <h0>| {dh:.1e}, "
                  f"|m + gamma - eta*| {deta:.1e}", elapsed)


def test_criterion_05_bq_certificate():
    t0 = time.perf_counter()
    p = config_from_dict({"params": {"G": 1.0, "D": 1.0, "delta": 0.7, "beta": 1.0}}).params
    eq = equilibrium_from(1.0, 0.0, p)
    q = 1.0
    # oracle: (delta beta - l) * (l^2 - (qG h^3/3 + D h) l + qGD h^4/3 - q^2 h^4 sigma'(0)^2/16)
    quad = np.roots([1.0, -(q / 3 + 1.0), q / 3 - q * q / 16])
    oracle = np.sort(np.concatenate([[0.7], quad.real]))
    cert = bq_is_positive_definite(bq_matrix(q, eq, p))
    err = float(np.max(np.abs(cert.eigenvalues - oracle)))
    bad = bq_is_positive_definite(bq_matrix(1.5 * q_admissible_max(p), eq, p))
    ok = (cert.positive_definite and err <= 1e-10
          and np.allclose(oracle, [0.25, 0.7, 13 / 12], atol=1e-12)
          and not bad.positive_definite)
    report(5, ok, f"eigenvalues {np.round(cert.eigenvalues, 12).tolist()} (err {err:.1e}), "
                  f"q = 1.5 q_max indefinite: {not bad.positive_definite}",
           time.perf_counter() - t0)


def test_criterion_06_frechet():
    t0 = time.perf_counter()
    cfg = config_from_dict({})
    eq = cfg.equilibrium()
    op = assemble_linearized(cfg.grid, cfg.params, eq)
    n = cfg.n_cells
    u = eq.stacked(n)
    v = np.random.default_rng(cfg.seed).standard_normal(3 * n)
    v /= np.linalg.norm(v)
    av = op.apply(v)
    f0 = rhs_stacked(u, cfg.params)
    errs = {}
    for eps in (1e-5, 1e-6, 1e-7):
        fd = (rhs_stacked(u + eps * v, cfg.params) - f0) / eps
        errs[eps] = float(np.linalg.norm(fd - av) / np.linalg.norm(av))
    ok = errs[1e-6] <= 1e-4 and errs[1e-5] > errs[1e-6] > errs[1e-7]
    report(6, ok, "relative error " + ", ".join(f"eps={k:.0e}: {e:.2e}" for k, e in errs.items()),
           time.perf_counter() - t0)


def test_criterion_07_spectral_bound():
    t0 = time.perf_counter()
    spec = default_spectrum()
    p = config_from_dict({"params": {"K": 0.0}}).params
    n = 64
    dec = spectrum(assemble_linearized(Grid(n, p.L), p, equilibrium_from(1.0, 0.0, p)))
    k = np.arange(1, n)
    lap = 2.0 * n * n / p.L ** 2 * (1 - np.cos(k * np.pi / n))
    expected = np.sort(np.concatenate([-p.G / 3 * lap, -p.delta * lap, -p.D * lap]))
    got = np.sort(dec.eigenvalues.real)
    # the bulk/surface split is a neutral mode when K = 0; it is the top eigenvalue
    neutral = float(abs(got[-1]))
    rel = float(np.max(np.abs(got[:-1] - expected) / np.abs(expected)))
    imag = float(np.max(np.abs(dec.eigenvalues.imag)))
    ok = (spec.spectral_bound <= -1e-6 and rel <= 1e-10
          and neutral <= 1e-10 * lap.max() and imag <= 1e-10 * lap.max())
    report(7, ok, f"spectral bound {spec.spectral_bound:.6f} (<= -1e-6), "
                  f"Neumann modes rel err {rel:.1e} (<= 1e-10)", time.perf_counter() - t0)


def test_criterion_08_decay_rate():
    cfg, s0, trace, final, elapsed = default_long_run()
    t0 = time.perf_counter()
    spec = default_spectrum()
    eq = trace.equilibrium
    scale = math.sqrt(cfg.params.L) * (eq.h_star + eq.eta_star)
    rep = cli.compare_decay(trace.times, diag.trace_norm(trace), spec.spectral_bound, scale)
    ratio = rep["ratio"]
    ok = ratio is not None and 0.8 <= ratio <= 1.2
    report(8, ok, f"omega_fit {rep['omega_fit']:.5f} over {rep['window']}, omega0 "
                  f"{spec.omega0:.5f}, ratio {ratio:.4f} (in [0.8, 1.2])",
           elapsed + time.perf_counter() - t0)


def test_criterion_09_heat_oracle():
    t0 = time.perf_counter()
    cfg = config_from_dict({"params": {"G": 0.0, "K": 0.0,
                                       "sigma_law": {"kind": "linear", "slope": 0.0}}})
    p = cfg.params
    n = 128
    grid = Grid(n, p.L)
    x = grid.centers
    eq = equilibrium_from(1.0, 0.01, p)
    a = 1e-3
    shape = np.cos(np.pi * x / p.L)
    s0 = State(np.full(n, eq.h_star), np.full(n, eq.m_star), eq.gamma_star + a * shape)
    T = 0.1
    trace, final = run(s0, p, IntegratorConfig(t_end=T, sample_interval=T))
    amp = 2.0 / p.L * np.sum((final.gamma - final.gamma.mean()) * shape) * grid.dx
    exact = a * math.exp(-p.D * (math.pi / p.L) ** 2 * T)
    rel = abs(amp / exact - 1.0)
    ok = final.t == T and rel <= 0.01
    report(9, ok, f"mode amplitude {amp:.6e} vs exact {exact:.6e}, rel err {rel:.2e} "
                  f"(<= 1e-2)", time.perf_counter() - t0)


def test_criterion_10_determinism_round_trip():
    t0 = time.perf_counter()
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        conf = tmp / "config.json"
        conf.write_text(json.dumps({"integrator": {"t_end": 1.0},
                                    "initial": {"noise": {"h": 1e-4, "gamma": 1e-5}}}))
        codes = [cli.cmd_simulate(conf, tmp / "a", seed=7, quiet=True),
                 cli.cmd_simulate(conf, tmp / "b", seed=7, quiet=True),
                 cli.cmd_simulate(tmp / "a" / "manifest.json", tmp / "c", quiet=True)]
        traces = [(tmp / d / "trace.csv").read_bytes() for d in "abc"]
    same = traces[0] == traces[1]
    replay = traces[0] == traces[2]
    ok = codes == [0, 0, 0] and same and replay
    report(10, ok, f"same config+seed bit-identical: {same}, manifest replay bit-identical: "
                   f"{replay}", time.perf_counter() - t0)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))

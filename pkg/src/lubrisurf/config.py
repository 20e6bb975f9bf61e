"""Run configuration: JSON schema, defaults, validation and initial data.

A config file is a JSON object::

    {
      "params":     {"G": 1, "D": 0.1, "delta": 0.1, "beta": 1, "K": 1, "L": 1,
                     "sigma_law": {"kind": "linear", "slope": 1}},
      "grid":       {"n_cells": 64},
      "integrator": {"scheme": "imex", "t_end": 20, "sample_interval": 0.05, ...},
      "initial":    {"kind": "perturbed_equilibrium", "h_star": 1, "eta_star": 0.01,
                     "mode": 1, "amplitude": {"h": 0.01, "m": 0.001, "gamma": 0.001}},
      "output":     {"snapshot_every": 20},
      "linstab":    {"q_fractions": [0.25, 0.5, 0.75]},
      "classify_tol": 1e-8,
      "seed": 0
    }

Every block is optional; missing keys take the defaults below. A
``manifest.json`` written by ``simulate`` is also accepted: its ``config``
entry is the fully resolved config of that run.

Initial-condition kinds:

``perturbed_equilibrium``
    ``amplitude * cos(mode * pi * x / L)`` added to each field of the
    equilibrium ``(h_star, eta_star)``, optional Gaussian cell noise
    ``noise: {"h": std, ...}`` drawn from ``seed``; the means are then reset
    so that ``<h> = h_star`` and ``<m + gamma> = eta_star`` exactly.
``arrays``
    per-cell values from a CSV file with columns ``h, m, gamma`` (a
    snapshot file works); ``path`` is relative to the config file.
``manufactured``
    ``profile: "gaussian_surfactant"`` - flat film ``h_star``, surface
    surfactant ``gamma_base + amplitude * exp(-((x - center) / width)^2)``
    and bulk surfactant in local sorption equilibrium ``m = h gamma / beta``.
"""
from __future__ import annotations

import copy
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .integrate import IntegratorConfig
from .linstab import equilibrium_from
from .model import Grid, Params, State

DEFAULT_CONFIG = {
    "params": {"G": 1.0, "D": 0.1, "delta": 0.1, "beta": 1.0, "K": 1.0, "L": 1.0,
               "sigma_law": {"kind": "linear", "slope": 1.0}},
    "grid": {"n_cells": 64},
    "integrator": {"scheme": "imex", "dt_init": 1e-4, "dt_min": 1e-12, "dt_max": 1e-2,
                   "safety": 0.4, "t_end": 20.0, "steady_tol": 1e-10,
                   "positivity_floor": 1e-10, "sample_interval": 0.05},
    "initial": {"kind": "perturbed_equilibrium", "h_star": 1.0, "eta_star": 0.01,
                "mode": 1, "amplitude": {"h": 1e-2, "m": 1e-3, "gamma": 1e-3}},
    "output": {"snapshot_every": 20},
    "linstab": {"q_fractions": [0.25, 0.5, 0.75]},
    "classify_tol": 1e-8,
    "seed": 0,
}

_TOP_KEYS = set(DEFAULT_CONFIG)
_FIELDS = ("h", "m", "gamma")


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        mergeable = isinstance(v, dict) and isinstance(out.get(k), dict)
        # an initial block of a different kind replaces the default wholesale
        if mergeable and k == "initial":
            mergeable = v.get("kind", out[k].get("kind")) == out[k].get("kind")
        out[k] = _merge(out[k], v) if mergeable else copy.deepcopy(v)
    return out


@dataclass
class RunConfig:
    params: Params
    n_cells: int
    integrator: IntegratorConfig
    initial: dict
    snapshot_every: int = 20
    linstab: dict = field(default_factory=dict)
    classify_tol: float = 1e-8
    seed: int = 0
    base_dir: Path = field(default_factory=Path.cwd)
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def grid(self):
        return Grid(self.n_cells, self.params.L)

    def to_dict(self):
        """Fully resolved config; re-ingesting it reproduces the run."""
        d = copy.deepcopy(self.raw)
        d["params"] = self.params.to_dict()
        d["grid"] = {"n_cells": self.n_cells}
        d["integrator"] = self.integrator.to_dict()
        d["seed"] = self.seed
        init = dict(d["initial"])
        if init.get("kind") == "arrays":
            init["path"] = str((self.base_dir / init["path"]).resolve())
        d["initial"] = init
        return d

    def initial_state(self):
        state = build_initial_state(self.initial, self.params, self.grid, self.seed,
                                    self.base_dir)
        bad = [f for f in _FIELDS if not np.all(getattr(state, f) > 0)]
        if bad:
            raise ConfigError(f"initial {', '.join(bad)} not strictly positive; "
                              "reduce the perturbation amplitude")
        return state

    def equilibrium(self, state=None):
        """Reference equilibrium: from the linstab block, the initial block, or the state means."""
        ls = self.linstab
        if "h_star" in ls and "eta_star" in ls:
            return equilibrium_from(float(ls["h_star"]), float(ls["eta_star"]), self.params)
        if self.initial.get("kind") == "perturbed_equilibrium":
            return equilibrium_from(float(self.initial["h_star"]),
                                    float(self.initial["eta_star"]), self.params)
        state = state if state is not None else self.initial_state()
        return equilibrium_from(float(state.h.mean()),
                                float((state.m + state.gamma).mean()), self.params)


def config_from_dict(data, base_dir=None, seed=None):
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    if "config" in data and "params" not in data:
        data = data["config"]
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config key(s): {sorted(unknown)}")
    d = _merge(DEFAULT_CONFIG, data)
    if seed is not None:
        d["seed"] = int(seed)
    try:
        params = Params.from_dict(d["params"])
        n_cells = d["grid"]["n_cells"]
        if not isinstance(n_cells, int) or isinstance(n_cells, bool):
            raise ConfigError(f"grid.n_cells must be an integer, got {n_cells!r}")
        Grid(n_cells, params.L)
        integ = dict(d["integrator"])
        integ = {k: (str(v) if k == "scheme" else int(v) if k == "max_steps" else float(v))
                 for k, v in integ.items()}
        integrator = IntegratorConfig(**integ)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    except ConfigError:
        raise
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"invalid config: {exc}") from None
    init = d["initial"]
    _validate_initial(init)
    snap = d["output"].get("snapshot_every", 20)
    if int(snap) != snap or snap < 0:
        raise ConfigError("output.snapshot_every must be a non-negative integer")
    tol = float(d["classify_tol"])
    if not tol > 0:
        raise ConfigError("classify_tol must be > 0")
    cfg = RunConfig(params=params, n_cells=n_cells, integrator=integrator, initial=init,
                    snapshot_every=int(snap), linstab=dict(d["linstab"]), classify_tol=tol,
                    seed=int(d["seed"]), base_dir=Path(base_dir or Path.cwd()), raw=d)
    return cfg


def _validate_initial(init):
    kind = init.get("kind")
    if kind == "perturbed_equilibrium":
        h_star = float(init.get("h_star", 1.0))
        eta = float(init.get("eta_star", 0.01))
        if not (h_star > 0 and math.isfinite(h_star)):
            raise ConfigError("initial.h_star must be > 0")
        if not (eta > 0 and math.isfinite(eta)):
            raise ConfigError("initial.eta_star must be > 0 (positive surfactant)")
        mode = init.get("mode", 1)
        if int(mode) != mode or mode < 0:
            raise ConfigError("initial.mode must be a non-negative integer")
        for k in ("amplitude", "noise"):
            block = init.get(k, {})
            if not isinstance(block, dict) or set(block) - set(_FIELDS):
                raise ConfigError(f"initial.{k} must map a subset of {_FIELDS} to numbers")
    elif kind == "arrays":
        if "path" not in init:
            raise ConfigError("initial.path is required for kind 'arrays'")
    elif kind == "manufactured":
        if init.get("profile") != "gaussian_surfactant":
            raise ConfigError(f"unknown manufactured profile {init.get('profile')!r}")
    else:
        raise ConfigError(f"unknown initial kind {kind!r}")


def build_initial_state(init, params, grid, seed=0, base_dir=None):
    x = grid.centers
    kind = init["kind"]
    if kind == "perturbed_equilibrium":
        eq = equilibrium_from(float(init.get("h_star", 1.0)), float(init.get("eta_star", 0.01)),
                              params)
        mode = int(init.get("mode", 1))
        shape = np.cos(mode * math.pi * x / params.L)
        amp = init.get("amplitude", {})
        base = {"h": eq.h_star, "m": eq.m_star, "gamma": eq.gamma_star}
        vals = {f: base[f] + float(amp.get(f, 0.0)) * shape for f in _FIELDS}
        noise = init.get("noise", {})
        if noise:
            rng = np.random.default_rng(seed)
            for f in _FIELDS:
                vals[f] = vals[f] + float(noise.get(f, 0.0)) * rng.standard_normal(x.size)
        vals["h"] = vals["h"] - (vals["h"].mean() - eq.h_star)
        off = (vals["m"] + vals["gamma"]).mean() - eq.eta_star
        share = eq.h_star / (eq.h_star + params.beta)
        vals["m"] = vals["m"] - share * off
        vals["gamma"] = vals["gamma"] - (1.0 - share) * off
        return State(vals["h"], vals["m"], vals["gamma"])
    if kind == "arrays":
        path = Path(base_dir or ".") / init["path"]
        try:
            data = np.genfromtxt(path, delimiter=",", names=True)
        except OSError as exc:
            raise ConfigError(f"cannot read initial arrays: {exc}") from None
        names = data.dtype.names or ()
        if not set(_FIELDS) <= set(names):
            raise ConfigError(f"{path} must have columns h, m, gamma")
        if data.size != grid.n_cells:
            raise ConfigError(f"{path} has {data.size} rows, grid has {grid.n_cells} cells")
        return State(np.array(data["h"]), np.array(data["m"]), np.array(data["gamma"]))
    if kind == "manufactured":
        h_star = float(init.get("h_star", 1.0))
        gb = float(init.get("gamma_base", 1e-3))
        amp = float(init.get("amplitude", 1e-2))
        width = float(init.get("width", 0.1 * params.L))
        center = float(init.get("center", 0.5 * params.L))
        g = gb + amp * np.exp(-(((x - center) / width) ** 2))
        h = np.full_like(x, h_star)
        return State(h, h * g / params.beta, g)
    raise ConfigError(f"unknown initial kind {kind!r}")


def load_config(path, seed=None):
    path = Path(path)
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return config_from_dict(data, base_dir=path.parent.resolve(), seed=seed)


def atomic_write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.{os.getpid()}.tmp")
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)

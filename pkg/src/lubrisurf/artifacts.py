"""On-disk artifacts: trace.csv, snapshots, manifest.json, linstab.json.

Floats in CSV files are written with 17 significant digits so that a
read-back reproduces the binary values exactly. Every file is written to a
temporary name first and renamed into place.
"""
from __future__ import annotations

import io
import json
import math
import platform
from pathlib import Path

import numpy as np

from .config import atomic_write_text
from .diagnostics import energy_residual
from .model import c0_from_state

TRACE_COLUMNS = ("t", "fluid_mass", "surfactant_mass", "energy",
                 "diss_1", "diss_2", "diss_3", "diss_4", "diss_5",
                 "residual", "l2_h", "l2_m", "l2_gamma")
SNAPSHOT_COLUMNS = ("x", "h", "m", "gamma", "c0")
FLOAT_FMT = "%.17g"


def _csv_text(columns, table):
    buf = io.StringIO()
    np.savetxt(buf, np.atleast_2d(table), delimiter=",", fmt=FLOAT_FMT,
               header=",".join(columns), comments="")
    return buf.getvalue()


def trace_table(trace):
    a = trace.arrays()
    resid = energy_residual(trace) if trace.n_samples >= 3 else np.full(trace.n_samples, np.nan)
    return np.column_stack([a["t"], a["fluid_mass"], a["surfactant_mass"], a["energy"],
                            a["dissipation"], resid, a["l2"]])


def write_trace(path, trace):
    atomic_write_text(path, _csv_text(TRACE_COLUMNS, trace_table(trace)))


def write_snapshot(path, state, params, x):
    table = np.column_stack([x, state.h, state.m, state.gamma, c0_from_state(state, params)])
    atomic_write_text(path, _csv_text(SNAPSHOT_COLUMNS, table))


def read_csv(path):
    """Columns of a CSV artifact as a dict of float arrays."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return {name: data[:, i] for i, name in enumerate(header)}


def _clean(obj):
    """Make an object JSON-safe: numpy scalars/arrays to Python, NaN/inf to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_json(path, obj):
    atomic_write_text(path, json.dumps(_clean(obj), indent=2, allow_nan=False) + "\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def versions():
    import scipy

    from . import __version__
    return {"lubrisurf": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}

"""Conserved masses, the Lyapunov energy and its dissipation, steady-state
classification and exponential-decay fitting."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .discretize import face_values, rhs
from .errors import PositivityError

DISSIPATION_NAMES = (
    "diss_surface_diffusion",
    "diss_bulk_diffusion",
    "diss_marangoni",
    "diss_gravity_marangoni_square",
    "diss_sorption",
)


@dataclass
class EnergyReport:
    energy: float
    diss_surface_diffusion: float
    diss_bulk_diffusion: float
    diss_marangoni: float
    diss_gravity_marangoni_square: float
    diss_sorption: float
    residual: float = math.nan

    @property
    def dissipations(self):
        return np.array([getattr(self, k) for k in DISSIPATION_NAMES])

    @property
    def total_dissipation(self):
        return float(self.dissipations.sum())


def _dx(state, params):
    return params.L / state.n_cells


def fluid_mass(state, params):
    return float(np.sum(state.h) * _dx(state, params))


def surfactant_mass(state, params):
    """Total surfactant: surface part plus bulk part (m = h C0 / beta)."""
    return float(np.sum(state.gamma + state.m) * _dx(state, params))


def _require_positive(state):
    if np.any(~(state.h > 0)) or np.any(~(state.m > 0)) or np.any(~(state.gamma > 0)):
        raise PositivityError("energy is defined for strictly positive states only")


def energy(state, params, entropy):
    _require_positive(state)
    h, m, g = state.h, state.m, state.gamma
    c = params.beta * m / h
    density = entropy.phi(g) + h / params.beta * entropy.phi(c) + 0.5 * params.G * h * h
    return float(np.sum(density) * _dx(state, params))


def dissipation(state, params, entropy, with_energy=True):
    """Energy and the five non-negative dissipation rates.

    Gradient terms are face sums using the same two-point differences as
    the fluxes; the sorption term is a cell sum.
    """
    _require_positive(state)
    dx = _dx(state, params)
    beta, G = params.beta, params.G
    fv = face_values(state, params)
    h, m, g = state.h, state.m, state.gamma
    c = beta * m / h
    c_f = 0.5 * (c[:-1] + c[1:])
    dc = (c[1:] - c[:-1]) / dx
    hf = fv.h

    surf = params.D * np.sum(entropy.d2phi(fv.gamma) * fv.dgamma ** 2) * dx
    bulk = params.delta / beta * np.sum(entropy.d2phi(c_f) * hf * dc ** 2) * dx
    mar = 0.25 * np.sum(hf * fv.dsig_dx ** 2) * dx
    sq = np.sum((G / math.sqrt(3.0) * hf ** 1.5 * fv.dh
                 - math.sqrt(3.0) / 2.0 * np.sqrt(hf) * fv.dsig_dx) ** 2) * dx
    sorp = params.K * np.sum((entropy.dphi(g) - entropy.dphi(c)) * (g - c)) * dx
    e = energy(state, params, entropy) if with_energy else math.nan
    return EnergyReport(e, float(surf), float(bulk), float(mar), float(sq), float(sorp))


def energy_residual(trace):
    """d/dt energy (finite differences of the samples) plus total dissipation.

    Interior samples use the second-order central difference on the actual
    sample times, end samples the second-order one-sided formula.
    """
    t = np.asarray(trace.times, dtype=float)
    if t.size < 3:
        raise ValueError("energy residual needs at least 3 samples")
    e = np.asarray(trace.energy, dtype=float)
    de = np.gradient(e, t, edge_order=2)
    return de + np.asarray(trace.dissipation, dtype=float).sum(axis=1)


class SteadyKind(enum.Enum):
    NOT_STEADY = "NotSteady"
    STEADY_CONSTANT = "SteadyConstant"
    STEADY_NONCONFORMING = "SteadyNonconforming"


@dataclass
class SteadyVerdict:
    kind: SteadyKind
    h: float = math.nan
    m: float = math.nan
    gamma: float = math.nan

    def __str__(self):
        return self.kind.value


def classify_steady(state, params, tol):
    h, m, g = state.h, state.m, state.gamma
    hb, mb, gb = h.mean(), m.mean(), g.mean()
    flat = max(np.abs(h - hb).max(), np.abs(m - mb).max(), np.abs(g - gb).max())
    if flat <= tol and abs(params.beta * mb - hb * gb) <= tol:
        return SteadyVerdict(SteadyKind.STEADY_CONSTANT, float(hb), float(mb), float(gb))
    resid = max(np.abs(d).max() for d in rhs(state, params))
    if resid <= tol:
        return SteadyVerdict(SteadyKind.STEADY_NONCONFORMING)
    return SteadyVerdict(SteadyKind.NOT_STEADY)


def deviation_norms(state, eq, params):
    """Discrete L2 norms of (h - h*, m - m*, gamma - gamma*) and an H1-like total."""
    dx = _dx(state, params)
    dev = (state.h - eq.h_star, state.m - eq.m_star, state.gamma - eq.gamma_star)
    l2 = [math.sqrt(np.sum(d * d) * dx) for d in dev]
    grad2 = sum(np.sum(np.diff(d) ** 2) / dx for d in dev)
    h1 = math.sqrt(sum(v * v for v in l2) + grad2)
    return l2, h1


def fit_decay_series(times, norms):
    """Least-squares fit of ``log(norm) = a - omega t``; returns (omega, r^2)."""
    t = np.asarray(times, dtype=float)
    y = np.asarray(norms, dtype=float)
    if t.size < 5:
        raise ValueError("decay fit needs at least 5 samples in the window")
    if np.any(~(y > 0)):
        raise ValueError("decay fit needs strictly positive norms")
    logy = np.log(y)
    A = np.column_stack([np.ones_like(t), t])
    coef, *_ = np.linalg.lstsq(A, logy, rcond=None)
    fit = A @ coef
    ss_res = float(np.sum((logy - fit) ** 2))
    ss_tot = float(np.sum((logy - logy.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(-coef[1]), r2


def trace_norm(trace, norm="l2"):
    if norm == "l2":
        return np.sqrt(np.sum(np.asarray(trace.l2) ** 2, axis=1))
    if norm == "h1":
        return np.asarray(trace.h1, dtype=float)
    raise ValueError(f"unknown norm {norm!r}")


def fit_decay_rate(trace, window, norm="l2"):
    """Decay rate of the distance to equilibrium over ``window = (t0, t1)``."""
    t = np.asarray(trace.times, dtype=float)
    y = trace_norm(trace, norm)
    sel = (t >= window[0]) & (t <= window[1])
    return fit_decay_series(t[sel], y[sel])


def tail_window(times, norms, scale=1.0, fraction=0.5, floor_rel=1e-11):
    """Late-time window for decay fitting.

    Keeps the leading stretch of samples whose norm stays above the rounding
    floor ``floor_rel * scale`` and returns the last ``fraction`` of it as
    ``(t0, t1)``, or None when fewer than 5 samples remain.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(norms, dtype=float)
    above = y > floor_rel * scale
    stop = int(np.argmin(above)) if not above.all() else y.size
    if stop < 5:
        return None
    first = int(math.floor((1.0 - fraction) * stop))
    if stop - first < 5:
        first = stop - 5
    return float(t[first]), float(t[stop - 1])

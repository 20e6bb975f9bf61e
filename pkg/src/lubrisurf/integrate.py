"""Time integration of the semi-discrete system.

Two schemes:

* ``rk2``  - Heun's method on the full right-hand side.
* ``imex`` - the linear diffusions ``delta m_xx`` and ``D gamma_xx`` are
  taken implicitly (one tridiagonal solve each), everything else with a
  forward Euler step.

Positivity is enforced by rejecting a step and halving dt; nothing is ever
clipped, so the discrete conservation laws survive every accepted step.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg.lapack import dgtsv

from . import diagnostics as diag
from .discretize import implicit_diffusion, neumann_laplacian_apply, rhs
from .errors import ConfigError, StepRejected
from .linstab import equilibrium_from
from .model import State, entropy_build

log = logging.getLogger(__name__)

SCHEMES = ("rk2", "imex")


@dataclass(frozen=True)
class IntegratorConfig:
    scheme: str = "imex"
    dt_init: float = 1e-4
    dt_min: float = 1e-12
    dt_max: float = 1e-2
    safety: float = 0.4
    t_end: float = 1.0
    steady_tol: float = 1e-10
    positivity_floor: float = 1e-10
    sample_interval: float = 0.01
    max_steps: int = 50_000_000
    growth: float = 1.25

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if not (0 < self.dt_min <= self.dt_init <= self.dt_max):
            raise ConfigError("need 0 < dt_min <= dt_init <= dt_max")
        if not 0 < self.safety < 1:
            raise ConfigError("safety factor must lie in (0, 1)")
        if not self.t_end > 0:
            raise ConfigError("t_end must be > 0")
        if not self.steady_tol > 0:
            raise ConfigError("steady_tol must be > 0")
        if not self.positivity_floor >= 0:
            raise ConfigError("positivity_floor must be >= 0")
        if not self.sample_interval > 0:
            raise ConfigError("sample_interval must be > 0")
        if not self.growth >= 1:
            raise ConfigError("growth must be >= 1")

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class RunTrace:
    times: list = field(default_factory=list)
    fluid_mass: list = field(default_factory=list)
    surfactant_mass: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    dissipation: list = field(default_factory=list)
    l2: list = field(default_factory=list)
    h1: list = field(default_factory=list)
    accepted: int = 0
    rejected: int = 0
    halt_reason: str = ""
    halt_detail: str = ""
    equilibrium: object = None

    def record(self, state, params, entropy):
        rep = diag.dissipation(state, params, entropy)
        l2, h1 = diag.deviation_norms(state, self.equilibrium, params)
        self.times.append(float(state.t))
        self.fluid_mass.append(diag.fluid_mass(state, params))
        self.surfactant_mass.append(diag.surfactant_mass(state, params))
        self.energy.append(rep.energy)
        self.dissipation.append(rep.dissipations)
        self.l2.append(l2)
        self.h1.append(h1)

    @property
    def n_samples(self):
        return len(self.times)

    def arrays(self):
        """Numeric columns as numpy arrays (dissipation is n x 5, l2 is n x 3)."""
        return {
            "t": np.array(self.times),
            "fluid_mass": np.array(self.fluid_mass),
            "surfactant_mass": np.array(self.surfactant_mass),
            "energy": np.array(self.energy),
            "dissipation": np.array(self.dissipation).reshape(-1, 5),
            "l2": np.array(self.l2).reshape(-1, 3),
            "h1": np.array(self.h1),
        }


class NonFiniteState(ArithmeticError):
    pass


def stable_dt_estimate(state, params, safety=0.4, scheme="rk2"):
    """``safety * dx^2 / max effective diffusivity``.

    The diffusivities are the diagonal of the quasilinear diffusion matrix:
    ``G h^3 / 3``, ``delta`` and ``D - h gamma sigma'(gamma)``. The IMEX
    scheme treats ``delta`` and ``D`` implicitly, so they are left out.
    Returns ``inf`` when nothing constrains the step.
    """
    dx = params.L / state.n_cells
    h, g = state.h, state.gamma
    marangoni = -h * g * params.sigma_law.dsigma(g)
    nu = [params.G / 3.0 * np.max(h) ** 3]
    if scheme == "imex":
        nu.append(np.max(marangoni))
    else:
        nu.extend([params.delta, np.max(params.D + marangoni)])
    top = max(nu)
    if not top > 0:
        return math.inf
    return safety * dx * dx / top


def _implicit_solve(b, coef, dx):
    """Solve ``(I - coef * Lap) x = b`` with zero-flux ends (LAPACK gtsv)."""
    n = b.size
    r = coef / (dx * dx)
    off = np.full(n - 1, -r)
    diag = np.full(n, 1.0 + 2.0 * r)
    diag[0] = diag[-1] = 1.0 + r
    *_, x, info = dgtsv(off, diag, off.copy(), b)
    if info != 0:
        raise NonFiniteState(f"tridiagonal solve failed (info={info})")
    return x


def _implicit_update(b, coef, dx):
    # write the solution as b + coef * Lap(x): the flux-difference form keeps
    # the cell sum exact up to rounding of the increments, not of the values
    x = _implicit_solve(b, coef, dx)
    return b + coef * neumann_laplacian_apply(x, dx)


def _check(h, m, g, floor):
    for name, arr in (("h", h), ("m", m), ("gamma", g)):
        if ((arr > floor) & (arr < np.inf)).all():
            continue
        if not np.isfinite(arr).all():
            raise NonFiniteState(f"non-finite value in {name}")
        bad = np.flatnonzero(arr <= floor)
        raise StepRejected(name, bad[0], arr[bad[0]])


def step(state, params, cfg, dt, f0=None):
    """Advance one step of size ``dt``.

    Raises StepRejected when a stage or the result falls to or below
    ``cfg.positivity_floor`` and NonFiniteState on overflow/NaN.
    """
    if f0 is None:
        f0 = rhs(state, params)
    h, m, g = state.h, state.m, state.gamma
    floor = cfg.positivity_floor
    if cfg.scheme == "rk2":
        h1 = h + dt * f0[0]
        m1 = m + dt * f0[1]
        g1 = g + dt * f0[2]
        _check(h1, m1, g1, floor)
        f1 = rhs(State(h1, m1, g1), params)
        hn = h + 0.5 * dt * (f0[0] + f1[0])
        mn = m + 0.5 * dt * (f0[1] + f1[1])
        gn = g + 0.5 * dt * (f0[2] + f1[2])
    else:
        dx = params.L / state.n_cells
        _, lm, lg = implicit_diffusion(state, params)
        hn = h + dt * f0[0]
        mn = _implicit_update(m + dt * (f0[1] - lm), dt * params.delta, dx)
        gn = _implicit_update(g + dt * (f0[2] - lg), dt * params.D, dx)
    _check(hn, mn, gn, floor)
    return State(hn, mn, gn, state.t + dt)


def run(state0, params, cfg, on_sample=None):
    """Integrate from ``state0`` until ``t_end``, a steady state, or a halt.

    Samples are taken every ``cfg.sample_interval`` (steps are shortened to
    land on sample times) and at the final time. ``on_sample(state, k)`` is
    called after each sample. Returns ``(trace, final_state)``; the reason
    for stopping is in ``trace.halt_reason``: ``t_end``, ``steady``,
    ``positivity_loss``, ``non_finite`` or ``max_steps``.
    """
    state = state0.copy()
    state.check_positive()
    entropy = entropy_build(params.sigma_law)
    eq = equilibrium_from(float(np.mean(state.h)),
                          float(np.mean(state.m + state.gamma)), params)
    trace = RunTrace(equilibrium=eq)

    def sample():
        trace.record(state, params, entropy)
        if on_sample is not None:
            on_sample(state, trace.n_samples - 1)

    sample()
    k_next = 1
    dt = cfg.dt_init
    steps = 0
    while True:
        f0 = rhs(state, params)
        # NaN and inf both propagate through np.max (unlike the builtin max)
        resid = float(np.max([np.max(np.abs(f)) for f in f0]))
        if not math.isfinite(resid):
            trace.halt_reason = "non_finite"
            trace.halt_detail = f"non-finite right-hand side at step {steps}"
            break
        if resid < cfg.steady_tol:
            trace.halt_reason = "steady"
            trace.halt_detail = f"max|rhs| = {resid:.3e} < {cfg.steady_tol:.1e}"
            break
        if state.t >= cfg.t_end:
            trace.halt_reason = "t_end"
            break
        if steps >= cfg.max_steps:
            trace.halt_reason = "max_steps"
            break

        t_sample = min(k_next * cfg.sample_interval, cfg.t_end)
        est = stable_dt_estimate(state, params, cfg.safety, cfg.scheme)
        h_try = max(min(dt, cfg.dt_max, est), cfg.dt_min)
        to_sample = t_sample - state.t
        # land on the sample time instead of leaving a rounding-sized remainder
        landing = h_try >= to_sample - 1e-9 * h_try
        if landing:
            h_try = to_sample
        try:
            new = step(state, params, cfg, h_try, f0)
        except StepRejected as rej:
            trace.rejected += 1
            dt = 0.5 * h_try
            log.debug("step %d rejected at t=%.6g: %s", steps, state.t, rej)
            if dt < cfg.dt_min:
                trace.halt_reason = "positivity_loss"
                trace.halt_detail = (f"{rej.field}[{rej.index}] = {rej.value:.3e} at t={state.t:.6g}, "
                                     f"step {steps}: dt fell below dt_min")
                break
            continue
        except NonFiniteState as exc:
            trace.halt_reason = "non_finite"
            trace.halt_detail = f"{exc} at step {steps}"
            break
        steps += 1
        trace.accepted += 1
        if landing:
            new.t = t_sample
        state = new
        if not landing:
            dt = min(h_try * cfg.growth, cfg.dt_max)
        if landing:
            k_next += 1
            sample()

    if trace.times[-1] < state.t:
        sample()
    return trace, state

"""Parameters, surface-tension laws, the entropy function, grid and state.

Unknowns are the film height ``h``, the scaled bulk surfactant
``m = h * C0 / beta`` and the surface surfactant ``gamma``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from .errors import ConfigError, DomainError, PositivityError

# concentrations at which a general law is probed for sigma' <= 0
ENTROPY_PROBE = np.concatenate([[0.0], np.geomspace(1e-8, 1e8, 257)])
QUAD_EPSABS = 1e-12


@dataclass(frozen=True)
class SurfaceTensionLaw:
    """Constitutive law sigma(gamma).

    ``linear``:   sigma = 1 - slope * gamma (slope 1 is the usual law,
                  slope 0 switches Marangoni stresses off).
    ``sheludko``: sigma = (alpha + 1) * (1 + c * gamma) ** -3 with
                  c = ((alpha + 1) / alpha) ** (1/3) - 1, decreasing from
                  alpha + 1 at gamma = 0 to alpha at gamma = 1.
    """

    kind: str = "linear"
    slope: float = 1.0
    alpha: float = 1.0

    def __post_init__(self):
        if self.kind not in ("linear", "sheludko"):
            raise ConfigError(f"unknown surface tension law {self.kind!r}")
        if self.kind == "linear" and not (self.slope >= 0 and math.isfinite(self.slope)):
            raise ConfigError("linear law slope must be >= 0 (sigma non-increasing)")
        if self.kind == "sheludko" and not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ConfigError("Sheludko alpha must be > 0")

    @classmethod
    def linear(cls, slope=1.0):
        return cls("linear", slope=float(slope))

    @classmethod
    def sheludko(cls, alpha):
        return cls("sheludko", alpha=float(alpha))

    @property
    def sheludko_c(self):
        return ((self.alpha + 1.0) / self.alpha) ** (1.0 / 3.0) - 1.0

    def sigma(self, gamma):
        g = np.asarray(gamma, dtype=float)
        if self.kind == "linear":
            return 1.0 - self.slope * g
        c = self.sheludko_c
        return (self.alpha + 1.0) * (1.0 + c * g) ** -3

    def dsigma(self, gamma):
        g = np.asarray(gamma, dtype=float)
        if self.kind == "linear":
            return np.full_like(g, -self.slope) if g.ndim else -self.slope
        c = self.sheludko_c
        return -3.0 * c * (self.alpha + 1.0) * (1.0 + c * g) ** -4

    def to_dict(self):
        if self.kind == "linear":
            return {"kind": "linear", "slope": self.slope}
        return {"kind": "sheludko", "alpha": self.alpha}

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        kind = d.pop("kind", "linear")
        try:
            return cls(kind, **{k: float(v) for k, v in d.items()})
        except TypeError as exc:
            raise ConfigError(f"bad sigma_law entry: {exc}") from None


def _check_gamma(gamma):
    g = np.asarray(gamma, dtype=float)
    if np.any(~np.isfinite(g)) or np.any(g < 0):
        raise DomainError("surface concentration must be finite and >= 0")


def sigma_eval(law, gamma):
    _check_gamma(gamma)
    return law.sigma(gamma)


def sigma_prime(law, gamma):
    _check_gamma(gamma)
    return law.dsigma(gamma)


@dataclass(frozen=True)
class Params:
    G: float = 1.0
    D: float = 0.1
    delta: float = 0.1
    beta: float = 1.0
    K: float = 1.0
    L: float = 1.0
    sigma_law: SurfaceTensionLaw = field(default_factory=SurfaceTensionLaw)

    def __post_init__(self):
        for name in ("D", "delta", "beta", "L"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ConfigError(f"{name} must be > 0, got {v!r}")
        # G = 0 is allowed so that gravity can be switched off in reference problems
        for name in ("G", "K"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ConfigError(f"{name} must be >= 0, got {v!r}")

    def to_dict(self):
        return {"G": self.G, "D": self.D, "delta": self.delta, "beta": self.beta,
                "K": self.K, "L": self.L, "sigma_law": self.sigma_law.to_dict()}

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        law = SurfaceTensionLaw.from_dict(d.pop("sigma_law", {"kind": "linear"}))
        unknown = set(d) - {"G", "D", "delta", "beta", "K", "L"}
        if unknown:
            raise ConfigError(f"unknown parameter(s): {sorted(unknown)}")
        try:
            vals = {k: float(v) for k, v in d.items()}
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"non-numeric parameter: {exc}") from None
        return cls(sigma_law=law, **vals)


@dataclass(frozen=True)
class Entropy:
    """phi with phi'' (r) * r = -sigma'(r), normalised by phi(1) = phi'(1) = 0."""

    phi: Callable
    dphi: Callable
    d2phi: Callable
    closed_form: bool


def _linear_entropy(slope):
    def phi(r):
        r = np.asarray(r, dtype=float)
        return slope * (r * np.log(r) - r + 1.0)

    def dphi(r):
        return slope * np.log(np.asarray(r, dtype=float))

    def d2phi(r):
        return slope / np.asarray(r, dtype=float)

    return Entropy(phi, dphi, d2phi, closed_form=True)


def entropy_build(law):
    """Entropy function for ``law``.

    The linear law has a closed form. Any other law integrates
    ``phi'' = -sigma'/r`` with adaptive quadrature:
    ``phi'(r) = int_1^r phi''`` and ``phi(r) = int_1^r (r - s) phi''(s) ds``.
    """
    if law.kind == "linear":
        return _linear_entropy(law.slope)

    if np.any(law.dsigma(ENTROPY_PROBE) > 0):
        raise DomainError("sigma' > 0 on the admissible range; entropy undefined")

    def d2phi(r):
        r = np.asarray(r, dtype=float)
        if np.any(r <= 0):
            raise PositivityError("entropy argument must be > 0")
        return -law.dsigma(r) / r

    def _integrand(s):
        ds = law.dsigma(s)
        if ds > 0:
            raise DomainError(f"sigma'({s:.6g}) > 0 at quadrature node; entropy undefined")
        return -ds / s

    def _dphi_scalar(r):
        if r <= 0:
            raise PositivityError("entropy argument must be > 0")
        if r == 1.0:
            return 0.0
        val, _ = integrate.quad(_integrand, 1.0, r, epsabs=QUAD_EPSABS, epsrel=1e-13, limit=200)
        return val

    def _phi_scalar(r):
        if r <= 0:
            raise PositivityError("entropy argument must be > 0")
        if r == 1.0:
            return 0.0
        val, _ = integrate.quad(lambda s: (r - s) * _integrand(s), 1.0, r,
                                epsabs=QUAD_EPSABS, epsrel=1e-13, limit=200)
        return val

    def dphi(r):
        r = np.asarray(r, dtype=float)
        out = np.array([_dphi_scalar(x) for x in r.ravel()]).reshape(r.shape)
        return out if out.ndim else float(out)

    def phi(r):
        r = np.asarray(r, dtype=float)
        out = np.array([_phi_scalar(x) for x in r.ravel()]).reshape(r.shape)
        return out if out.ndim else float(out)

    return Entropy(phi, dphi, d2phi, closed_form=False)


@dataclass(frozen=True)
class Grid:
    n_cells: int
    L: float = 1.0

    def __post_init__(self):
        if int(self.n_cells) != self.n_cells or self.n_cells < 4:
            raise ConfigError(f"n_cells must be an integer >= 4, got {self.n_cells!r}")
        if not self.L > 0:
            raise ConfigError("domain length must be > 0")

    @property
    def dx(self):
        return self.L / self.n_cells

    @property
    def centers(self):
        return (np.arange(self.n_cells) + 0.5) * self.dx

    @property
    def faces(self):
        return np.arange(self.n_cells + 1) * self.dx


@dataclass
class State:
    h: np.ndarray
    m: np.ndarray
    gamma: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.h = np.asarray(self.h, dtype=float)
        self.m = np.asarray(self.m, dtype=float)
        self.gamma = np.asarray(self.gamma, dtype=float)
        if not (self.h.shape == self.m.shape == self.gamma.shape) or self.h.ndim != 1:
            raise ValueError("h, m, gamma must be 1-D arrays of equal length")

    @property
    def n_cells(self):
        return self.h.size

    def fields(self):
        return {"h": self.h, "m": self.m, "gamma": self.gamma}

    def check_positive(self, floor=0.0):
        for name, arr in self.fields().items():
            bad = np.flatnonzero(~(arr > floor))
            if bad.size:
                i = bad[0]
                raise PositivityError(f"{name}[{i}] = {arr[i]!r} is not > {floor}")
        return self

    def stacked(self):
        return np.concatenate([self.h, self.m, self.gamma])

    @classmethod
    def from_stacked(cls, v, t=0.0):
        h, m, g = np.split(np.asarray(v, dtype=float), 3)
        return cls(h.copy(), m.copy(), g.copy(), t)

    def copy(self):
        return State(self.h.copy(), self.m.copy(), self.gamma.copy(), self.t)

    @classmethod
    def constant(cls, n_cells, h, m, gamma, t=0.0):
        return cls(np.full(n_cells, float(h)), np.full(n_cells, float(m)),
                   np.full(n_cells, float(gamma)), t)


def c0_from_state(state, params):
    """Bulk concentration C0 = beta * m / h."""
    if np.any(~(state.h > 0)):
        raise PositivityError("film height must be > 0 to recover C0")
    return params.beta * state.m / state.h

"""Linear stability of the constant steady states.

The assembled matrix is the Jacobian of :func:`lubrisurf.discretize.rhs` at
an equilibrium, i.e. the generator of ``dw/dt = J w``; decay corresponds to
eigenvalues with negative real part. It is studied on the subspace where the
mean of ``h`` and the mean of ``m + gamma`` vanish, which removes the two
neutral directions carried by mass conservation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .eigen import eigvals, jacobi_eigh
from .errors import ConfigError


@dataclass(frozen=True)
class Equilibrium:
    h_star: float
    eta_star: float
    m_star: float
    gamma_star: float

    def stacked(self, n_cells):
        return np.concatenate([np.full(n_cells, self.h_star), np.full(n_cells, self.m_star),
                               np.full(n_cells, self.gamma_star)])

    def to_dict(self):
        return {"h_star": self.h_star, "eta_star": self.eta_star,
                "m_star": self.m_star, "gamma_star": self.gamma_star}


def equilibrium_from(h_star, eta_star, params):
    """Constant steady state with film height ``h_star`` and total surfactant ``eta_star``.

    ``eta_star = 0`` (surfactant-free film) is accepted.
    """
    if not (h_star > 0 and math.isfinite(h_star)):
        raise ConfigError(f"h_star must be > 0, got {h_star!r}")
    if not (eta_star >= 0 and math.isfinite(eta_star)):
        raise ConfigError(f"eta_star must be >= 0, got {eta_star!r}")
    beta = params.beta
    return Equilibrium(float(h_star), float(eta_star),
                       h_star / (beta + h_star) * eta_star,
                       beta / (beta + h_star) * eta_star)


def _split(eq, params):
    s = eq.h_star + params.beta
    return eq.h_star / s, params.beta / s


def project_mean_zero(v, eq, params):
    v = np.asarray(v, dtype=float)
    h, m, g = np.split(v, 3)
    a_m, a_g = _split(eq, params)
    tot = np.mean(m + g)
    return np.concatenate([h - h.mean(), m - a_m * tot, g - a_g * tot])


def neumann_laplacian(n, dx):
    """Second-difference matrix with zero-flux closure on a cell-centred grid."""
    lap = (np.diag(np.full(n - 1, 1.0), -1) + np.diag(np.full(n - 1, 1.0), 1)
           - 2.0 * np.eye(n))
    lap[0, 0] = lap[-1, -1] = -1.0
    return lap / (dx * dx)


def _complement_basis(n):
    """Orthonormal basis (n x (n-1)) of vectors with zero sum, from a Householder reflector."""
    u = np.full(n, 1.0 / math.sqrt(n))
    u[0] -= 1.0
    refl = np.eye(n) - 2.0 * np.outer(u, u) / (u @ u)
    return refl[:, 1:]


def constrained_basis(n):
    """Orthonormal basis of {sum(h) = 0, sum(m) + sum(gamma) = 0} in R^{3n}."""
    q = np.zeros((3 * n, 3 * n - 2))
    q[:n, :n - 1] = _complement_basis(n)
    q[n:, n - 1:] = _complement_basis(2 * n)
    return q


@dataclass
class LinearOperator:
    matrix: np.ndarray
    n_cells: int
    equilibrium: Equilibrium
    basis: np.ndarray = field(repr=False)

    def apply(self, v):
        return self.matrix @ np.asarray(v, dtype=float)

    def restricted(self):
        """Matrix of the operator on the constrained subspace, in the basis ``self.basis``."""
        return self.basis.T @ self.matrix @ self.basis


def assemble_linearized(grid, params, eq):
    n = grid.n_cells
    lap = neumann_laplacian(n, grid.dx)
    eye = np.eye(n)
    G, D, delta, beta, K = params.G, params.D, params.delta, params.beta, params.K
    h, m, g = eq.h_star, eq.m_star, eq.gamma_star
    ds = float(params.sigma_law.dsigma(g))

    # diffusion matrix a(u*) of the quasilinear form
    a = np.array([
        [G / 3 * h ** 3, 0.0, -0.5 * h * h * ds],
        [G / 3 * h * h * m - delta * m / h, delta, -0.5 * h * m * ds],
        [G / 2 * h * h * g, 0.0, D - h * g * ds],
    ])
    # zero-order sorption: b(u*) plus the derivative of b(z) u* in z
    zero = np.array([
        [0.0, 0.0, 0.0],
        [-K * beta * m / (h * h), K * beta / h, -K],
        [K * beta * m / (h * h), -K * beta / h, K],
    ])
    mat = np.kron(a, lap) - np.kron(zero, eye)
    return LinearOperator(mat, n, eq, constrained_basis(n))


@dataclass
class Spectrum:
    eigenvalues: np.ndarray
    spectral_bound: float
    omega0: float

    def slowest(self, k=6):
        return self.eigenvalues[::-1][:k]


def spectrum(op, max_iter=None):
    """Eigenvalues on the constrained subspace, ascending by real part."""
    ev = eigvals(op.restricted(), max_iter=max_iter)
    ev = ev[np.lexsort((ev.imag, ev.real))]
    bound = float(ev.real.max())
    return Spectrum(ev, bound, -bound if bound < 0 else math.nan)


@dataclass(frozen=True)
class BqMatrix:
    matrix: np.ndarray
    q: float


@dataclass
class BqCertificate:
    positive_definite: bool
    eigenvalues: np.ndarray
    minors: np.ndarray
    failing_minor: int | None
    note: str = ""


def bq_matrix(q, eq, params):
    """Symmetric 3x3 matrix whose positivity gives weighted-L2 decay of the linearisation."""
    if not q > 0:
        raise ConfigError(f"q must be > 0, got {q!r}")
    G, D, delta, beta = params.G, params.D, params.delta, params.beta
    h, m, g = eq.h_star, eq.m_star, eq.gamma_star
    ds = float(params.sigma_law.dsigma(g))
    b12 = beta * G / 6 * h * h * m - delta * beta / 2 * m / h
    b13 = G / 4 * h ** 3 * g - q / 4 * h * h * ds
    b23 = -beta / 4 * m * h * ds
    mat = np.array([
        [q * G / 3 * h ** 3, b12, b13],
        [b12, delta * beta, b23],
        [b13, b23, D * h - h * h * g * ds],
    ])
    return BqMatrix(mat, float(q))


def q_admissible_max(params):
    """Upper end of the weights q for which b_q is positive definite at zero surfactant."""
    ds0 = float(params.sigma_law.dsigma(0.0))
    if ds0 == 0.0:
        return math.inf
    return 16.0 * params.G * params.D / (3.0 * ds0 * ds0)


def _det3(a):
    return float(a[0, 0] * (a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1])
                 - a[0, 1] * (a[1, 0] * a[2, 2] - a[1, 2] * a[2, 0])
                 + a[0, 2] * (a[1, 0] * a[2, 1] - a[1, 1] * a[2, 0]))


def bq_is_positive_definite(b):
    """Sylvester leading-minor test cross-checked against Jacobi eigenvalues."""
    mat = b.matrix if isinstance(b, BqMatrix) else np.asarray(b, dtype=float)
    if np.abs(mat - mat.T).max() > 1e-12 * max(1.0, np.abs(mat).max()):
        raise ValueError("b_q must be symmetric")
    minors = np.array([mat[0, 0],
                       mat[0, 0] * mat[1, 1] - mat[0, 1] * mat[1, 0],
                       _det3(mat)])
    bad = np.flatnonzero(~(minors > 0))
    by_minors = bad.size == 0
    w, _ = jacobi_eigh(mat)
    by_eigs = bool(w[0] > 0)
    note = ""
    if by_minors != by_eigs:
        note = "leading minors and eigenvalues disagree (borderline); reported as not definite"
    return BqCertificate(by_minors and by_eigs, w, minors,
                         int(bad[0]) + 1 if bad.size else None, note)

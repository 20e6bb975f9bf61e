"""Cell-centred finite-volume semi-discretisation of the (h, m, gamma) system.

Every equation is written as ``du/dt = d/dx(F) + S``. Fluxes ``F`` live on
the ``n + 1`` cell faces; both boundary faces carry zero flux, which is the
discrete form of the homogeneous Neumann conditions. Mobilities are
arithmetic means of the adjacent cell values, gradients are two-point
differences, so the scheme is second order and conservative.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PositivityError
from .model import State


@dataclass
class FaceValues:
    """Interior-face quantities (length ``n - 1``)."""

    h: np.ndarray
    m: np.ndarray
    gamma: np.ndarray
    dsigma: np.ndarray
    dh: np.ndarray
    dm: np.ndarray
    dgamma: np.ndarray
    dsig_dx: np.ndarray


@dataclass
class FluxSet:
    flux_h: np.ndarray
    flux_m: np.ndarray
    flux_gamma: np.ndarray


def _avg(a):
    return 0.5 * (a[:-1] + a[1:])


def _grad(a, dx):
    return (a[1:] - a[:-1]) / dx


def face_values(state, params):
    dx = params.L / state.n_cells
    h, m, g = state.h, state.m, state.gamma
    g_f = _avg(g)
    dg = _grad(g, dx)
    dsig = params.sigma_law.dsigma(g_f)
    return FaceValues(h=_avg(h), m=_avg(m), gamma=g_f, dsigma=dsig,
                      dh=_grad(h, dx), dm=_grad(m, dx), dgamma=dg,
                      dsig_dx=dsig * dg)


def compute_fluxes(state, params):
    h, m, g = state.h, state.m, state.gamma
    G, delta, D = params.G, params.delta, params.D
    n = state.n_cells
    dx = params.L / n

    h2 = h * h
    cells = np.array([h2 * h, h2, h2 * m, h * m, m / h, h2 * g, h * g, g])
    mob_h3, mob_h2, mob_h2m, mob_hm, mob_m_over_h, mob_h2g, mob_hg, g_f = (
        0.5 * (cells[:, :-1] + cells[:, 1:]))
    dh = (h[1:] - h[:-1]) / dx
    dm = (m[1:] - m[:-1]) / dx
    dg = (g[1:] - g[:-1]) / dx
    dsig = params.sigma_law.dsigma(g_f) * dg

    flux = np.zeros((3, n + 1))
    flux[0, 1:-1] = G / 3.0 * mob_h3 * dh - 0.5 * mob_h2 * dsig
    flux[1, 1:-1] = ((G / 3.0 * mob_h2m - delta * mob_m_over_h) * dh
                     - 0.5 * mob_hm * dsig + delta * dm)
    flux[2, 1:-1] = G / 2.0 * mob_h2g * dh - mob_hg * dsig + D * dg
    return FluxSet(flux[0], flux[1], flux[2])


def sorption_source(state, params):
    """Cellwise exchange between bulk and surface; the two sources cancel."""
    if np.any(~(state.h > 0)):
        raise PositivityError("film height must be > 0 in the sorption term")
    gap = params.K * (params.beta * state.m / state.h - state.gamma)
    return -gap, gap


def rhs(state, params):
    """Time derivatives ``(dh, dm, dgamma)`` of the semi-discrete system."""
    dx = params.L / state.n_cells
    fl = compute_fluxes(state, params)
    src_m, src_g = sorption_source(state, params)
    dh = (fl.flux_h[1:] - fl.flux_h[:-1]) / dx
    dm = (fl.flux_m[1:] - fl.flux_m[:-1]) / dx + src_m
    dg = (fl.flux_gamma[1:] - fl.flux_gamma[:-1]) / dx + src_g
    return dh, dm, dg


def rhs_stacked(v, params):
    dh, dm, dg = rhs(State.from_stacked(v), params)
    return np.concatenate([dh, dm, dg])


def implicit_diffusion(state, params):
    """The linear part ``(0, delta m_xx, D gamma_xx)`` contained in :func:`rhs`.

    Used by the IMEX integrator to move it to the implicit side.
    """
    dx = params.L / state.n_cells
    return (np.zeros_like(state.h),
            params.delta * neumann_laplacian_apply(state.m, dx),
            params.D * neumann_laplacian_apply(state.gamma, dx))


def neumann_laplacian_apply(u, dx):
    d = u[1:] - u[:-1]
    out = np.zeros_like(u)
    out[:-1] += d
    out[1:] -= d
    return out / (dx * dx)

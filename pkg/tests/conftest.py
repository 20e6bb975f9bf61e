import sys

import numpy as np
import pytest

from lubrisurf.linstab import equilibrium_from
from lubrisurf.model import Grid, Params, State, SurfaceTensionLaw


def default_params(**kw):
    base = dict(G=1.0, D=0.1, delta=0.1, beta=1.0, K=1.0, L=1.0,
                sigma_law=SurfaceTensionLaw.linear())
    base.update(kw)
    return Params(**base)


def perturbed_state(params, n=64, h_star=1.0, eta_star=0.01, amp=(1e-2, 1e-3, 1e-3), mode=1):
    eq = equilibrium_from(h_star, eta_star, params)
    x = Grid(n, params.L).centers
    c = np.cos(mode * np.pi * x / params.L)
    return State(eq.h_star + amp[0] * c, eq.m_star + amp[1] * c, eq.gamma_star + amp[2] * c)


@pytest.fixture
def params():
    return default_params()


@pytest.fixture
def state(params):
    return perturbed_state(params)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "_LINES", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)

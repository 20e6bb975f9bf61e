import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lubrisurf.errors import ConfigError, DomainError, PositivityError
from lubrisurf.model import (Grid, Params, State, SurfaceTensionLaw, c0_from_state,
                             entropy_build, sigma_eval, sigma_prime)

from conftest import default_params


@pytest.mark.parametrize("law, gamma, expected", [
    (SurfaceTensionLaw.linear(), 0.0, 1.0),
    (SurfaceTensionLaw.linear(), 0.25, 0.75),
    (SurfaceTensionLaw.sheludko(1.0), 0.0, 2.0),
])
def test_sigma_examples(law, gamma, expected):
    assert sigma_eval(law, gamma) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 4.0])
def test_sheludko_runs_from_alpha_plus_one_to_alpha(alpha):
    law = SurfaceTensionLaw.sheludko(alpha)
    assert sigma_eval(law, 0.0) == pytest.approx(alpha + 1, rel=1e-15)
    assert sigma_eval(law, 1.0) == pytest.approx(alpha, rel=1e-13)


def test_nonfinite_concentration_rejected():
    with pytest.raises(DomainError):
        sigma_prime(SurfaceTensionLaw.sheludko(1.0), np.nan)


def test_negative_concentration_rejected():
    with pytest.raises(DomainError):
        sigma_eval(SurfaceTensionLaw.linear(), -0.1)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 4.0])
def test_sheludko_derivative_matches_finite_difference(alpha):
    law = SurfaceTensionLaw.sheludko(alpha)
    g = np.linspace(0.0, 5.0, 11)[1:]
    eps = 1e-6
    fd = (law.sigma(g + eps) - law.sigma(g - eps)) / (2 * eps)
    assert np.allclose(law.dsigma(g), fd, rtol=1e-7)


@pytest.mark.parametrize("law", [SurfaceTensionLaw.linear(), SurfaceTensionLaw.sheludko(1.0),
                                 SurfaceTensionLaw.sheludko(3.0)])
def test_sigma_strictly_decreasing(law):
    g = np.linspace(0.0, 10.0, 200)
    assert np.all(law.dsigma(g) < 0)
    assert np.all(np.diff(law.sigma(g)) < 0)


def test_linear_entropy_examples():
    ent = entropy_build(SurfaceTensionLaw.linear())
    assert ent.closed_form
    assert ent.phi(1.0) == 0.0
    assert ent.dphi(1.0) == 0.0
    assert ent.d2phi(2.0) * 2.0 == pytest.approx(1.0, abs=1e-15)


def sheludko_entropy_closed_form(alpha, r):
    """Hand-integrated phi', phi for the Sheludko law (partial fractions)."""
    c = ((alpha + 1) / alpha) ** (1 / 3) - 1
    k = 3 * c * (alpha + 1)

    def F(x):
        u = 1 + c * x
        return math.log(x) - math.log(u) + 1 / u + 1 / (2 * u ** 2) + 1 / (3 * u ** 3)

    def H(x):
        u = 1 + c * x
        return (x * math.log(x) - x - (u * math.log(u) - u) / c + math.log(u) / c
                - 1 / (2 * c * u) - 1 / (6 * c * u ** 2))

    return k * (F(r) - F(1)), k * (H(r) - H(1) - F(1) * (r - 1))


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
def test_sheludko_entropy_against_closed_form(alpha):
    law = SurfaceTensionLaw.sheludko(alpha)
    ent = entropy_build(law)
    assert not ent.closed_form
    for r in np.geomspace(0.01, 50.0, 9):
        dphi, phi = sheludko_entropy_closed_form(alpha, r)
        assert ent.dphi(r) == pytest.approx(dphi, rel=1e-10, abs=1e-10)
        assert ent.phi(r) == pytest.approx(phi, rel=1e-10, abs=1e-10)


def test_sheludko_entropy_ode_example():
    law = SurfaceTensionLaw.sheludko(1.0)
    ent = entropy_build(law)
    assert abs(ent.d2phi(0.1) * 0.1 + law.dsigma(0.1)) <= 1e-10


@pytest.mark.parametrize("law", [SurfaceTensionLaw.linear(), SurfaceTensionLaw.linear(2.5),
                                 SurfaceTensionLaw.sheludko(1.0)])
def test_entropy_ode_on_log_grid(law):
    ent = entropy_build(law)
    r = np.geomspace(0.01, 10.0, 40)
    assert np.max(np.abs(ent.d2phi(r) * r + law.dsigma(r))) <= 1e-10
    assert np.all(ent.d2phi(r) >= 0)
    # phi' is the antiderivative of phi'' (checked by finite differences)
    eps = 1e-5
    mid = r[(r > 2 * eps)]
    fd = (ent.dphi(mid + eps) - ent.dphi(mid - eps)) / (2 * eps)
    assert np.allclose(fd, ent.d2phi(mid), rtol=1e-6)


def test_entropy_rejects_nonpositive_argument():
    ent = entropy_build(SurfaceTensionLaw.sheludko(1.0))
    with pytest.raises(PositivityError):
        ent.d2phi(0.0)


@pytest.mark.parametrize("h, m, beta, expected", [
    ((1, 1), (0.05, 0.05), 1.0, (0.05, 0.05)),
    ((2, 2), (0.04, 0.04), 0.5, (0.01, 0.01)),
])
def test_c0_examples(h, m, beta, expected):
    p = default_params(beta=beta)
    s = State(np.array(h, float), np.array(m, float), np.ones(2))
    assert np.allclose(c0_from_state(s, p), expected, rtol=0, atol=1e-15)


def test_c0_requires_positive_height(params):
    s = State(np.array([1.0, 0.0]), np.ones(2), np.ones(2))
    with pytest.raises(PositivityError):
        c0_from_state(s, params)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(1e-3, 1e3), min_size=4, max_size=16),
       st.floats(1e-3, 1e3), st.floats(1e-2, 1e2))
def test_c0_round_trip(hs, c, beta):
    h = np.array(hs)
    p = default_params(beta=beta)
    c0 = np.full_like(h, c)
    s = State(h, h * c0 / beta, np.ones_like(h))
    assert np.all(np.abs(c0_from_state(s, p) - c0) <= 1e-14 * max(1.0, c))


@pytest.mark.parametrize("field, value", [
    ("D", 0.0), ("delta", -1.0), ("beta", 0.0), ("L", 0.0), ("K", -0.5), ("G", -1.0),
])
def test_params_validation(field, value):
    with pytest.raises(ConfigError):
        default_params(**{field: value})


def test_params_dict_round_trip():
    p = default_params(sigma_law=SurfaceTensionLaw.sheludko(2.0), K=0.0)
    assert Params.from_dict(p.to_dict()) == p
    with pytest.raises(ConfigError):
        Params.from_dict({**p.to_dict(), "bogus": 1})


def test_grid_geometry():
    g = Grid(4, 2.0)
    assert g.dx == 0.5
    assert np.allclose(g.centers, [0.25, 0.75, 1.25, 1.75])
    assert np.allclose(g.faces, [0, 0.5, 1.0, 1.5, 2.0])
    with pytest.raises(ConfigError):
        Grid(3)


def test_state_positivity_and_stacking():
    s = State.constant(5, 1.0, 0.1, 0.2)
    assert s.check_positive() is s
    v = s.stacked()
    assert v.shape == (15,)
    assert np.array_equal(State.from_stacked(v).gamma, s.gamma)
    bad = State(np.array([1.0, -1.0, 1.0, 1.0]), np.ones(4), np.ones(4))
    with pytest.raises(PositivityError, match=r"h\[1\]"):
        bad.check_positive()

"""Thin liquid film with soluble surfactant under gravity: simulation and
linear stability of the constant steady states."""

__version__ = "0.1.0"

from .model import (Entropy, Grid, Params, State, SurfaceTensionLaw, c0_from_state,  # noqa: F401
                    entropy_build, sigma_eval, sigma_prime)

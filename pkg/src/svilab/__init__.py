"""Simulation and Monte Carlo verification of degenerate stochastic PDEs of linear growth.

Modules
-------
flux
    Convex potentials ``psi`` of linear growth, their flux ``phi`` and growth checks.
grid
    Grids, difference operators, resolvent, Galerkin projection and discrete energies.
noise
    Vertical and normal noise coefficients and counter-based Brownian increments.
stepper
    Euler-Maruyama integration of the viscous approximations.
mc
    Monte Carlo estimators (moments, contraction, viscosity rate, SVI, relaxation).
cli
    The ``svilab`` command-line runner.
estimators
    scikit-learn compatible transformers.
"""

from .flux import (
    FluxModel,
    linear,
    mean_curvature,
    minimal_surface,
    newtonian,
    recession,
    scaled_mean_curvature,
    validate_growth,
)
from .grid import DIRICHLET, PERIODIC, EnergyValue, Grid, GridFunction, energy, resolvent
from .noise import NormalNoiseSpec, VerticalNoiseSpec, WienerSampler, geometric_family
from .stepper import BlowUpError, ConfigError, DirichletVertical, PathRecord, PeriodicNormal, SimConfig, simulate

__version__ = "0.1.0"

__all__ = [
    "FluxModel",
    "linear",
    "mean_curvature",
    "minimal_surface",
    "newtonian",
    "recession",
    "scaled_mean_curvature",
    "validate_growth",
    "DIRICHLET",
    "PERIODIC",
    "EnergyValue",
    "Grid",
    "GridFunction",
    "energy",
    "resolvent",
    "NormalNoiseSpec",
    "VerticalNoiseSpec",
    "WienerSampler",
    "geometric_family",
    "BlowUpError",
    "ConfigError",
    "DirichletVertical",
    "PathRecord",
    "PeriodicNormal",
    "SimConfig",
    "simulate",
]

"""Numerical solver and verification suite for a singular double-phase problem.

Modules
-------
grid         box grids, quadrature, gradients
exponents    variable exponents and hypothesis checks
modular      modulars and Luxemburg norms
energy       energy functional and weak-form gradient
hardy        Hardy-type inequalities for the singular terms
solver       mountain-pass geometry and solver
config, cli  run configuration and command line
"""

from .energy import EnergyBreakdown, Problem, ProblemParams, energy, energy_truncated, gradient
from .exponents import ExponentData, sample_exponents, validate_hypotheses
from .grid import Grid, GridFunction, build_grid, discrete_gradient, integrate
from .modular import holder_pairing, luxemburg_norm, modular

__version__ = "0.1.0"

__all__ = [
    "EnergyBreakdown",
    "ExponentData",
    "Grid",
    "GridFunction",
    "Problem",
    "ProblemParams",
    "build_grid",
    "discrete_gradient",
    "energy",
    "energy_truncated",
    "gradient",
    "holder_pairing",
    "integrate",
    "luxemburg_norm",
    "modular",
    "sample_exponents",
    "validate_hypotheses",
]

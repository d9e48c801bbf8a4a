"""Radially symmetric fast diffusion with absorption: solvers, Barenblatt profiles,
entropy functionals and rate checks."""

from .grid import Field, RadialGrid, build_grid
from .params import ModelParams, classify_regime, derive_constants
from .profiles import BarenblattSpec, mass_of_theta, solve_theta
from .scheme import StepControl

__all__ = [
    "BarenblattSpec",
    "Field",
    "ModelParams",
    "RadialGrid",
    "StepControl",
    "build_grid",
    "classify_regime",
    "derive_constants",
    "mass_of_theta",
    "solve_theta",
]

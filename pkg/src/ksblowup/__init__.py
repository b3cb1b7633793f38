"""Blow-up simulation and subsolution certificates for a radial flux-limited chemotaxis model."""
from .params import DerivedParams, ModelParams, derive, validate_model
from .grid import Grid, build_grid
from .solver import SolverConfig, run

__all__ = ["DerivedParams", "Grid", "ModelParams", "SolverConfig", "build_grid", "derive", "run",
           "validate_model"]
__version__ = "0.1.0"

"""Numerical study of the asymptotic time delay of fast diffusion flows."""
from .constants import ConstantSet, ModelParams, ParameterError, asymptotic_gamma, derive_constants, spectral_gap
from .delay import DelayReport, DiagnosticSeries, run_pipeline
from .field import DensityField, Grid, build_grid
from .profiles import BarenblattSpec, discretize
from .solver import SolverConfig, evolve

__all__ = [
    "BarenblattSpec", "ConstantSet", "DelayReport", "DensityField", "DiagnosticSeries", "Grid",
    "ModelParams", "ParameterError", "SolverConfig", "asymptotic_gamma", "build_grid", "derive_constants",
    "discretize", "evolve", "run_pipeline", "spectral_gap",
]

"""Time-periodic solutions of 2D Navier-Stokes flow coupled to a damped beam."""

__version__ = "0.1.0"

from .beam import BeamOperator, BeamParams
from .config import SolverConfig, load_config
from .coupled import CoupledState, CoupledSystem, coupled_system
from .errors import (AssemblyFailure, BallViolation, ConfigError, DivergenceFailure,
                     DomainDegeneracy, FSIError, PeriodicityDefect, SolverFailure,
                     VerificationFailure)
from .grid import Grid2D, ScalarField, VectorField, divergence, gradient, laplacian
from .leray import leray_project
from .nonlinear import TransformedSolution, solve_periodic_fsi
from .periodic import (FourierSeries, PeriodicForcing, check_spectral_criterion,
                       solve_periodic_linear_fsi)
from .stokes import InflowProfile, solve_stokes_mixed

__all__ = [
    "AssemblyFailure", "BallViolation", "BeamOperator", "BeamParams", "ConfigError",
    "CoupledState", "CoupledSystem", "DivergenceFailure", "DomainDegeneracy", "FSIError",
    "FourierSeries", "Grid2D", "InflowProfile", "PeriodicForcing", "PeriodicityDefect",
    "ScalarField", "SolverConfig", "SolverFailure", "TransformedSolution", "VectorField",
    "VerificationFailure", "check_spectral_criterion", "coupled_system", "divergence",
    "gradient", "laplacian", "leray_project", "load_config", "solve_periodic_fsi",
    "solve_periodic_linear_fsi", "solve_stokes_mixed",
]

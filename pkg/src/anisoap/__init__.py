"""Finite-element solvers for strongly anisotropic elliptic problems.

Provides the singular-perturbation (P), limit (L) and asymptotic-preserving
(AP) formulations on Cartesian Q2 grids, manufactured test cases, a
field-line oracle and an experiment runner.
"""
from .cases import CaseDef, get_case
from .experiments import ErrorRecord, ExperimentConfig, run_experiment, run_single
from .field import DiffusionSpec, FieldCase
from .formulations import build_system, extract_solution
from .grid import ConfigurationError, GridSpec, build_grid

__all__ = [
    "CaseDef", "ConfigurationError", "DiffusionSpec", "ErrorRecord", "ExperimentConfig",
    "FieldCase", "GridSpec", "build_grid", "build_system", "extract_solution", "get_case",
    "run_experiment", "run_single",
]

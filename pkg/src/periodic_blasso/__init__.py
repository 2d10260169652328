"""Reconstruction of periodic sparse signals from spatial samples with
TV-penalised least squares: grid FISTA, CPGD and Frank-Wolfe solvers plus
dual-certificate analysis."""
from .certificates import (SaturationSet, certificate_pairing, empirical_certificate,
                           saturation_bound, saturation_points, uniqueness_matrix)
from .cpgd import CpgdConfig, cpgd_reconstruct
from .estimators import CpgdRegressor, FrankWolfeRegressor, GridLassoRegressor
from .experiments import ExperimentConfig, Solver, emit_csv, run_experiment
from .fista import FistaConfig, fista_solve, grid_reconstruct
from .frank_wolfe import FwConfig, Variant, fw_solve
from .operators import Family, FourierSymbol, GreensFunction, OperatorSpec, make_symbol
from .report import SolverReport
from .sampling import SampleSet, SparseMeasure

__version__ = "0.1.0"

__all__ = [
    "CpgdConfig", "CpgdRegressor", "ExperimentConfig", "Family", "FistaConfig",
    "FourierSymbol", "FrankWolfeRegressor", "FwConfig", "GreensFunction",
    "GridLassoRegressor", "OperatorSpec", "SampleSet", "SaturationSet", "Solver",
    "SolverReport", "SparseMeasure", "Variant", "certificate_pairing", "cpgd_reconstruct",
    "emit_csv", "empirical_certificate", "fista_solve", "fw_solve", "grid_reconstruct",
    "make_symbol", "run_experiment", "saturation_bound", "saturation_points",
    "uniqueness_matrix",
]

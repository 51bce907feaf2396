"""Adapted theta-scheme quadrature and BSDE solver."""

from .bsde_solver import BsdeProblem, SchemeConfig, SolveOutput, SolutionField, solve_bsde
from .expectation import HermiteRule, conditional_expectation, gauss_hermite
from .grid_interp import GridFunction, SpaceGrid, interpolate, make_grid
from .harness import ConvergenceReport, StudySpec, builtin_problem, emit_report, fit_convergence_rate, run_convergence_study
from .quad1d import IntegralResult, PartitionSpec, integrate_adapted, integrate_fixed_theta, reference_integrand
from .theta_core import (
    StencilWeights,
    ThetaDecision,
    ThetaLimits,
    adapted_theta_exact,
    adapted_theta_sampled,
    lagrange_derivative_weights,
    theta_weights,
)

__version__ = "0.1.0"

__all__ = [
    "BsdeProblem",
    "ConvergenceReport",
    "GridFunction",
    "HermiteRule",
    "IntegralResult",
    "PartitionSpec",
    "SchemeConfig",
    "SolutionField",
    "SolveOutput",
    "SpaceGrid",
    "StencilWeights",
    "StudySpec",
    "ThetaDecision",
    "ThetaLimits",
    "adapted_theta_exact",
    "adapted_theta_sampled",
    "builtin_problem",
    "conditional_expectation",
    "emit_report",
    "fit_convergence_rate",
    "gauss_hermite",
    "integrate_adapted",
    "integrate_fixed_theta",
    "interpolate",
    "lagrange_derivative_weights",
    "make_grid",
    "reference_integrand",
    "run_convergence_study",
    "solve_bsde",
    "theta_weights",
]

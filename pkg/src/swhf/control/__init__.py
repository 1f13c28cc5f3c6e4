"""Optimal control of densities on graphs under Wong-Zakai common noise."""

from .action import action, constraint_lhs, constraint_residual, midpoint_theta, noise_flux
from .duality import DualCertificate, dual_certificate, duality_gap, stationarity_residual
from .feasible import feasible_path
from .problem import ControlProblem, ControlSolution, Variant
from .prox import perspective_prox
from .solver import SolverOptions, gamma_study, optimal_flux, solve, solve_special

__all__ = [
    "ControlProblem",
    "ControlSolution",
    "DualCertificate",
    "SolverOptions",
    "Variant",
    "action",
    "constraint_lhs",
    "constraint_residual",
    "dual_certificate",
    "duality_gap",
    "feasible_path",
    "gamma_study",
    "midpoint_theta",
    "noise_flux",
    "optimal_flux",
    "perspective_prox",
    "solve",
    "solve_special",
    "stationarity_residual",
]

"""Action, constraint residual and helpers shared by the control solvers."""

from __future__ import annotations

import numpy as np

from ..graph import Graph
from .problem import ControlProblem, Variant

__all__ = [
    "midpoints",
    "midpoint_theta",
    "noise_flux",
    "action",
    "constraint_lhs",
    "constraint_residual",
    "transformed_flux",
]


def midpoints(rho_path):
    rho_path = np.asarray(rho_path, dtype=float)
    return 0.5 * (rho_path[1:] + rho_path[:-1])


def midpoint_theta(problem: ControlProblem, rho_path):
    """``theta_e(rho_bar_k)`` with shape ``(M, E)``; tiny negative inputs are clipped to 0."""
    rb = np.maximum(midpoints(rho_path), 0.0)
    return problem.graph.edge_theta(rb, problem.theta)


def noise_flux(g: Graph, potential, theta_path, slopes):
    """Edge flux ``dW_k w_e (B potential)_e theta_e`` carried by the noise."""
    return slopes[:, None] * g.omega * g.diff(potential) * theta_path


def _check_shapes(problem, rho_path, m_path):
    g = problem.graph
    rho_path = np.asarray(rho_path, dtype=float)
    m_path = np.asarray(m_path, dtype=float)
    if rho_path.shape != (problem.M + 1, g.n):
        raise ValueError(f"rho path must have shape {(problem.M + 1, g.n)}, got {rho_path.shape}")
    if m_path.shape != (problem.M, g.n_edges):
        raise ValueError(f"m path must have shape {(problem.M, g.n_edges)}, got {m_path.shape}")
    return rho_path, m_path


def action(problem: ControlProblem, rho_path, m_path) -> float:
    """Kinetic action; ``inf`` when flux crosses an edge with ``theta = 0``."""
    rho_path, m_path = _check_shapes(problem, rho_path, m_path)
    th = midpoint_theta(problem, rho_path)
    a = problem.graph.omega * th
    pos = a > 0
    if np.any(~pos & (m_path != 0)):
        return float("inf")
    cost = np.where(pos, m_path**2 / np.where(pos, a, 1.0), 0.0)
    return float(problem.h * 0.5 * np.sum(cost))


def transformed_flux(problem: ControlProblem, m_path):
    """Flux in the variables where the constraint is additive (``(1 + eps dW) m`` for special)."""
    m_path = np.asarray(m_path, dtype=float)
    if problem.variant is Variant.SPECIAL:
        return m_path * problem.reweighting()[:, None]
    return m_path


def constraint_lhs(problem: ControlProblem, rho_path, m_path):
    """Left side of the discrete continuity equation, shape ``(M, N)``."""
    rho_path, m_path = _check_shapes(problem, rho_path, m_path)
    g = problem.graph
    lhs = np.diff(rho_path, axis=0) / problem.h + g.scatter(transformed_flux(problem, m_path))
    if problem.variant is Variant.ADDITIVE and np.any(problem.sigma) and np.any(problem.slopes):
        th = midpoint_theta(problem, rho_path)
        lhs = lhs - g.scatter(noise_flux(g, problem.sigma, th, problem.slopes))
    return lhs


def constraint_residual(problem: ControlProblem, rho_path, m_path) -> float:
    """Max-norm residual of the continuity equation and the boundary conditions."""
    rho_path = np.asarray(rho_path, dtype=float)
    res = np.max(np.abs(constraint_lhs(problem, rho_path, m_path)))
    bnd = max(np.max(np.abs(rho_path[0] - problem.rho_a)), np.max(np.abs(rho_path[-1] - problem.rho_b)))
    return float(max(res, bnd))


"""Dual certificates for the discrete transport problems.

For multipliers ``phi_k`` (one per interval) the Lagrangian

    A(rho, m) + sum_k h <phi_k, constraint_k>

is minimised in ``m`` in closed form.  What remains is linear in the
densities: ``<v_j, rho_j>`` at interior grid points plus boundary terms, with

    q_k = -h sum_{e ~ i} (w_e / 2) [ (B phi_k)_e^2 / (2 c_k) + dW_k (B Sigma)_e (B phi_k)_e ]
    v_j = -(phi_j - phi_{j-1}) + (q_j + q_{j-1}) / 2.

Minimising over the simplex gives ``min_i v_{j,i}``; shifting ``phi_j`` by the
running sum of these minima moves them into the boundary terms, so that

    dual = <S_end, rho_b> - <S_start, rho_a>,
    S_end = phi_{M-1} + q_{M-1}/2,  S_start = phi_0 - q_0/2,

is a lower bound for the action of every feasible path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .action import action, midpoint_theta
from .problem import ControlProblem, ControlSolution

__all__ = ["DualCertificate", "dual_certificate", "duality_gap", "stationarity_residual"]


@dataclass
class DualCertificate:
    S: np.ndarray
    S_start: np.ndarray
    S_end: np.ndarray
    value: float
    v: np.ndarray


def _q(problem: ControlProblem, phi):
    g = problem.graph
    c = problem.cost_weights()
    dphi = g.diff(phi)
    dsig = g.diff(problem.noise_potential())
    per_edge = 0.5 * g.omega * (dphi**2 / (2.0 * c[:, None]) + problem.slopes[:, None] * dsig * dphi)
    return -problem.h * (per_edge @ g.abs_incidence)


def dual_certificate(problem: ControlProblem, phi) -> DualCertificate:
    """Normalise a multiplier path and evaluate the dual objective."""
    phi = np.asarray(phi, dtype=float)
    q = _q(problem, phi)
    v = -(phi[1:] - phi[:-1]) + 0.5 * (q[1:] + q[:-1])
    shift = np.concatenate(([0.0], np.cumsum(v.min(axis=1)))) if len(v) else np.zeros(1)
    S = phi + shift[:, None]
    v = v - v.min(axis=1, keepdims=True) if len(v) else v
    S_start = S[0] - 0.5 * q[0]
    S_end = S[-1] + 0.5 * q[-1]
    value = float(S_end @ problem.rho_b - S_start @ problem.rho_a)
    return DualCertificate(S=S, S_start=S_start, S_end=S_end, value=value, v=v)


def duality_gap(problem: ControlProblem, solution: ControlSolution) -> float:
    """``A(rho, m) - (<S(1), rho_b> - <S(0), rho_a>)`` for the normalised multipliers."""
    cert = dual_certificate(problem, solution.S)
    return action(problem, solution.rho, solution.m) - cert.value


def stationarity_residual(problem: ControlProblem, solution: ControlSolution, floor=1e-6):
    """Max-norm residual of the discrete Hamiltonian system where the path is interior.

    Returns ``(rho_residual, S_residual)``; ``nan`` when no grid point qualifies.
    """
    g = problem.graph
    rho, S = solution.rho, solution.S
    cert = dual_certificate(problem, S)
    th = midpoint_theta(problem, rho)
    c = problem.cost_weights()
    flux = g.omega * th * (g.diff(cert.S) / c[:, None] + problem.slopes[:, None] * g.diff(problem.noise_potential()))
    r_rho = np.diff(rho, axis=0) / problem.h - g.scatter(flux)
    interval_ok = np.minimum(rho[1:].min(axis=1), rho[:-1].min(axis=1)) > floor
    node_ok = rho[1:-1].min(axis=1) > floor
    res_rho = float(np.max(np.abs(r_rho[interval_ok]))) if np.any(interval_ok) else float("nan")
    r_S = cert.v / problem.h
    res_S = float(np.max(np.abs(r_S[node_ok]))) if np.any(node_ok) else float("nan")
    return res_rho, res_S

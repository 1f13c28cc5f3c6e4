"""Primal-dual hybrid gradient solver for the discrete transport problems.

Unknowns are the interior densities ``r = (rho_1, ..., rho_{M-1})`` and the
(transformed) fluxes ``m``.  The problem is written as

    min_x  F(K x) + G(x),    K x = (theta(rho_bar) - offset, m, r),

with ``F`` the weighted perspective cost plus ``r >= 0`` and ``G`` the
indicator of the affine continuity constraint ``C x = d``.  The proximal map
of ``G`` is an exact projection through a sparse factorisation of ``C C^T``;
the projection also yields the constraint multipliers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from ..errors import ConvergenceError
from ..graph import ThetaKind
from .action import action, constraint_residual, midpoint_theta, noise_flux
from .duality import dual_certificate
from .problem import ControlProblem, ControlSolution, Variant
from .prox import perspective_prox

__all__ = ["SolverOptions", "solve", "solve_special", "gamma_study", "optimal_flux"]


@dataclass(frozen=True)
class SolverOptions:
    tol_gap_abs: float = 1e-9
    tol_gap_rel: float = 1e-8
    tol_residual: float = 1e-8
    max_iter: int = 200_000
    check_every: int = 50
    primal_weight: float | None = None
    restart: bool = True
    raise_on_failure: bool = True


_RESTART_PERIOD = 500


class _Program:
    """Sparse operators of the discretised problem."""

    def __init__(self, problem: ControlProblem):
        g = problem.graph
        self.problem = problem
        M, N, E, h = problem.M, g.n, g.n_edges, problem.h
        self.M, self.N, self.E = M, N, E
        self.nr = (M - 1) * N
        self.nm = M * E
        inc = sp.csr_matrix(g.incidence)
        half_abs = sp.csr_matrix(0.5 * g.abs_incidence)
        slopes = problem.slopes
        pot = problem.noise_potential()
        # noise term of interval k is dW_k * Q (rho_k + rho_{k+1})
        Q = 0.25 * (inc.T @ sp.diags(g.omega * g.diff(pot)) @ sp.csr_matrix(g.abs_incidence))
        I = sp.identity(N, format="csr")

        # time-difference and noise blocks: row block k couples rho_k and rho_{k+1}
        Wd = sp.diags(slopes)
        left = sp.kron(sp.identity(M), -I / h) - sp.kron(Wd, Q)
        right = sp.kron(sp.identity(M), I / h) - sp.kron(Wd, Q)
        left, right = left.tocsc(), right.tocsc()
        # rho_k for k = 0..M-1 sits in column block k of `left`; rho_{k+1} in block k of `right`
        d = np.zeros(M * N)
        d -= left[:, :N] @ problem.rho_a
        d -= right[:, (M - 1) * N :] @ problem.rho_b
        Cr = left[:, N:] + right[:, : (M - 1) * N]
        Cm = sp.kron(sp.identity(M), inc.T)
        C = sp.hstack([Cr, Cm]).tocsr()
        # one row is implied by the others (total mass); drop it
        self.C = C[:-1]
        self.d = d[:-1]
        self.lu = splu((self.C @ self.C.T).tocsc())

        # theta at midpoints: a_k = (|B|/4)(rho_k + rho_{k+1})
        quarter = 0.5 * half_abs
        ql = sp.kron(sp.identity(M), quarter).tocsc()
        offset = ql[:, :N] @ problem.rho_a + ql[:, (M - 1) * N :] @ problem.rho_b
        self.A = (ql[:, N:] + ql[:, : (M - 1) * N]).tocsr()
        self.offset = offset
        c = problem.cost_weights()
        self.weights = (h * c[:, None] / g.omega[None, :]).reshape(-1)
        self.AT = self.A.T.tocsr()

    # K and its adjoint
    def K(self, x):
        r, m = x[: self.nr], x[self.nr :]
        return self.A @ r, m, r

    def KT(self, ya, yb, yr):
        return np.concatenate((self.AT @ ya + yr, yb))

    def norm_K(self, iters=200):
        rng = np.random.default_rng(0)
        x = rng.standard_normal(self.nr + self.nm)
        lam = 1.0
        for _ in range(iters):
            y = self.KT(*self.K(x))
            lam_new = np.linalg.norm(y)
            x = y / lam_new
            if abs(lam_new - lam) < 1e-10 * lam_new:
                break
            lam = lam_new
        return math.sqrt(lam_new)

    def project(self, z):
        """Euclidean projection onto ``C x = d``; also returns ``(C C^T)^{-1}(C z - d)``."""
        mu = self.lu.solve(self.C @ z - self.d)
        return z - self.C.T @ mu, mu

    def split(self, x):
        M, N, E = self.M, self.N, self.E
        rho = np.empty((M + 1, N))
        rho[0] = self.problem.rho_a
        rho[-1] = self.problem.rho_b
        if M > 1:
            rho[1:-1] = x[: self.nr].reshape(M - 1, N)
        return rho, x[self.nr :].reshape(M, E)

    def multipliers(self, mu, tau):
        phi = np.concatenate((mu, [0.0])) / (tau * self.problem.h)
        return phi.reshape(self.M, self.N)


def optimal_flux(problem: ControlProblem, rho_path):
    """Cheapest transformed flux for a given density path (``None`` rows never occur).

    For each interval the constraint ``B^T m = rhs`` is solved with
    ``m = D B psi``, ``D = diag(w theta / c)``: the minimum-cost flux.  Edges
    with ``theta = 0`` carry no flux.
    """
    g = problem.graph
    rho_path = np.asarray(rho_path, dtype=float)
    th = midpoint_theta(problem, rho_path)
    c = problem.cost_weights()
    rhs = -np.diff(rho_path, axis=0) / problem.h
    pot = problem.noise_potential()
    if np.any(pot) and np.any(problem.slopes):
        rhs = rhs + g.scatter(noise_flux(g, pot, th, problem.slopes))
    D = g.omega * th / c[:, None]
    B = g.incidence
    L = np.einsum("ea,ke,eb->kab", B, D, B)
    psi = np.einsum("kab,kb->ka", np.linalg.pinv(L, rcond=1e-13, hermitian=True), rhs)
    return D * g.diff(psi)


def _repair(program: _Program, x):
    """Feasible path near ``x``: clip tiny negative masses, renormalise, re-solve the flux."""
    problem = program.problem
    rho, _ = program.split(x)
    rho = np.maximum(rho, 0.0)
    rho /= rho.sum(axis=1, keepdims=True)
    rho[0] = problem.rho_a
    rho[-1] = problem.rho_b
    m_hat = optimal_flux(problem, rho)
    m = m_hat / problem.reweighting()[:, None] if problem.variant is Variant.SPECIAL else m_hat
    return rho, m


def _initial_point(problem: ControlProblem, program: _Program):
    from .feasible import feasible_path

    try:
        rho, m = feasible_path(problem)
    except ValueError:
        rho = np.linspace(0, 1, problem.M + 1)[:, None] * (problem.rho_b - problem.rho_a) + problem.rho_a
        m = np.zeros((problem.M, problem.graph.n_edges))
    if problem.variant is Variant.SPECIAL:
        m = m * problem.reweighting()[:, None]
    x = np.concatenate((rho[1:-1].reshape(-1), m.reshape(-1)))
    return program.project(x)[0]


def _prox_F_conj(program: _Program, ya, yb, yr, sigma):
    """``prox_{sigma F*}`` through the Moreau identity."""
    a, b = perspective_prox(ya / sigma + program.offset, yb / sigma, program.weights / sigma)
    return ya - sigma * (a - program.offset), yb - sigma * b, yr - sigma * np.maximum(yr / sigma, 0.0)


def _certificate(program, x, mu, tau):
    problem = program.problem
    rho, m = _repair(program, x)
    A = action(problem, rho, m)
    cert = dual_certificate(problem, program.multipliers(mu, tau))
    res = constraint_residual(problem, rho, m)
    return rho, m, A, cert, res


def _pdhg(problem: ControlProblem, opts: SolverOptions) -> ControlSolution:
    if problem.theta is not ThetaKind.ARITHMETIC:
        raise ValueError("the convex solver needs the arithmetic mean")
    program = _Program(problem)
    eta = 0.95 / program.norm_K()
    weight = 1.0 if opts.primal_weight is None else float(opts.primal_weight)
    adapt = opts.restart and opts.primal_weight is None
    x = _initial_point(problem, program)
    y = [np.zeros(program.nm), np.zeros(program.nm), np.zeros(program.nr)]
    mu = np.zeros(program.C.shape[0])
    tau, sigma = eta / weight, eta * weight
    x_anchor, y_anchor = x.copy(), np.concatenate(y)
    last_restart = 0
    best = None
    history = []
    kx = program.K(x)
    for it in range(1, opts.max_iter + 1):
        y = _prox_F_conj(program, *(yi + sigma * ki for yi, ki in zip(y, kx)), sigma)
        x_new, mu = program.project(x - tau * program.KT(*y))
        kx = program.K(2 * x_new - x)
        x = x_new
        if it % opts.check_every and it != opts.max_iter:
            continue
        rho, m, A, cert, res = _certificate(program, x, mu, tau)
        gap = A - cert.value
        history.append((it, A, cert.value, gap, res))
        if np.isfinite(gap) and (best is None or abs(gap) < abs(best[0])):
            best = (gap, rho, m, A, cert, res, it)
        tol = max(opts.tol_gap_abs, opts.tol_gap_rel * abs(A))
        if np.isfinite(A) and abs(gap) <= tol and res <= opts.tol_residual:
            return _solution(problem, rho, m, A, cert, res, it, True, history)
        if adapt and it - last_restart >= _RESTART_PERIOD:
            # balance primal and dual progress since the last restart
            y_flat = np.concatenate(y)
            dx = np.linalg.norm(x - x_anchor)
            dy = np.linalg.norm(y_flat - y_anchor)
            if dx > 1e-12 and dy > 1e-12:
                weight = math.exp(0.5 * math.log(dy / dx) + 0.5 * math.log(weight))
                weight = min(max(weight, 1e-3), 1e3)
                tau, sigma = eta / weight, eta * weight
            x_anchor, y_anchor = x.copy(), y_flat
            last_restart = it
    if best is None:
        raise ConvergenceError("no finite duality gap was reached", gap=float("nan"), residual=float("nan"),
                               iterations=opts.max_iter)
    gap, rho, m, A, cert, res, _ = best
    if opts.raise_on_failure:
        raise ConvergenceError(
            f"no convergence in {opts.max_iter} iterations (gap {gap:.3g}, residual {res:.3g})",
            gap=gap, residual=res, iterations=opts.max_iter,
        )
    return _solution(problem, rho, m, A, cert, res, opts.max_iter, False, history)


def _solution(problem, rho, m, A, cert, res, it, converged, history):
    return ControlSolution(
        rho=rho, m=m, S=cert.S, action=A, dual_value=cert.value, gap=A - cert.value, residual=res,
        iterations=it, S_start=cert.S_start, S_end=cert.S_end, converged=converged, history=history,
    )


def solve(problem: ControlProblem, options: SolverOptions | None = None) -> ControlSolution:
    """Minimise the action over feasible paths and certify the result by duality."""
    return _pdhg(problem, options or SolverOptions())


def solve_special(problem: ControlProblem, epsilon=None, options: SolverOptions | None = None) -> ControlSolution:
    """Solve the multiplicative variant by reweighting the classical problem."""
    if epsilon is not None:
        problem = problem.replace(epsilon=float(epsilon))
    problem = problem.replace(variant=Variant.SPECIAL)
    problem.reweighting()
    return _pdhg(problem, options or SolverOptions())


def gamma_study(problem: ControlProblem, eps_list, options: SolverOptions | None = None, executor=None):
    """Optimal actions of the multiplicative variant for each ``eps`` and their distance to ``eps = 0``.

    Returns a list of ``(eps, action, |action - action_0|)`` in input order.
    """
    eps_list = [float(e) for e in eps_list]
    if any(e < 0 for e in eps_list):
        raise ValueError("eps values must be non-negative")
    run = lambda e: solve_special(problem, e, options).action  # noqa: E731
    base = run(0.0)
    if executor is None:
        values = [base if e == 0 else run(e) for e in eps_list]
    else:
        values = list(executor.map(lambda e: base if e == 0 else run(e), eps_list))
    return [(e, a, abs(a - base)) for e, a in zip(eps_list, values)]

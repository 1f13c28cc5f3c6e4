"""Explicit feasible paths with finite action between any two densities.

Two nodes: hold ``rho_a`` and ramp linearly to ``rho_b`` over the final
Wong-Zakai interval.  More nodes: collapse ``rho_a`` onto the last node by
moving the mass of one node at a time to its parent in a breadth-first
spanning tree (leaves first), then run the collapse of ``rho_b`` backwards.
Every transfer happens across an edge whose midpoint mean is positive, and
the noise flux is supported where ``theta > 0``, so the action is finite.
"""

from __future__ import annotations

import math

import numpy as np

from ..graph import edge_index, spanning_tree
from .action import midpoint_theta, noise_flux
from .problem import ControlProblem, Variant

__all__ = ["feasible_path"]


def _collapse(rho, order, parent):
    """Snapshots and transfer edges collapsing ``rho`` onto ``order[0]``."""
    snaps, moves = [rho.copy()], []
    cur = rho.copy()
    for v in reversed(order[1:]):
        if cur[v] > 0:
            nxt = cur.copy()
            nxt[parent[v]] += nxt[v]
            nxt[v] = 0.0
            snaps.append(nxt)
            moves.append((v, parent[v]))
            cur = nxt
    return snaps, moves


def _stages(problem: ControlProblem):
    g = problem.graph
    a, b = problem.rho_a, problem.rho_b
    if np.array_equal(a, b):
        return [a, b], [None], [problem.M]
    if g.n == 2:
        delta = problem.noise.delta if problem.noise is not None else 1.0
        ramp = min(problem.M, max(1, math.ceil(delta * problem.M - 1e-9)))
        hold = problem.M - ramp
        keys = [a, a, b] if hold else [a, b]
        edges = [None, (0, 1)] if hold else [(0, 1)]
        counts = [hold, ramp] if hold else [ramp]
        return keys, edges, counts
    root = g.n - 1
    order, parent = spanning_tree(g, root)
    sa, ma = _collapse(a, order, parent)
    sb, mb = _collapse(b, order, parent)
    point = np.zeros(g.n)
    point[root] = 1.0
    sa[-1] = point
    sb[-1] = point
    keys = sa + sb[::-1][1:]
    edges = ma + [(p, v) for v, p in reversed(mb)]
    n_stage = len(edges)
    if n_stage == 0:
        return [a, b], [None], [problem.M]
    if problem.M < n_stage:
        raise ValueError(f"M={problem.M} intervals cannot hold {n_stage} transfer stages")
    base, extra = divmod(problem.M, n_stage)
    counts = [base + (1 if s < extra else 0) for s in range(n_stage)]
    return keys, edges, counts


def feasible_path(problem: ControlProblem):
    """Return ``(rho_path, m_path)`` satisfying the discrete constraint exactly."""
    g = problem.graph
    keys, edges, counts = _stages(problem)
    eidx = edge_index(g)
    M, h = problem.M, problem.h
    rho = np.empty((M + 1, g.n))
    m_hat = np.zeros((M, g.n_edges))
    k = 0
    rho[0] = keys[0]
    for s, (n_s, move) in enumerate(zip(counts, edges)):
        start, stop = keys[s], keys[s + 1]
        for j in range(1, n_s + 1):
            rho[k + j] = start + (stop - start) * (j / n_s)
        rho[k + n_s] = stop
        if move is not None:
            e, _ = eidx[move]
            tail = g.tails[e]
            # B^T m sends +m_e to the tail, so m_e = -(change at tail)/h
            m_hat[k : k + n_s, e] = -np.diff(rho[k : k + n_s + 1, tail]) / h
        k += n_s
    if problem.variant is Variant.SPECIAL:
        m = m_hat / problem.reweighting()[:, None]
    else:
        th = midpoint_theta(problem, rho)
        m = m_hat + noise_flux(g, problem.sigma, th, problem.slopes)
    return rho, m

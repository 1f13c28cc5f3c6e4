"""Convergence studies driven by shared noise paths."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .energy import HamiltonianSpec
from .flow import FlowConfig, Scheme, integrate
from .graph import Graph
from .noise import WongZakaiPath, sample_wiener

__all__ = ["WzStudy", "wz_study", "strong_order"]


@dataclass
class WzStudy:
    deltas: np.ndarray
    errors: np.ndarray
    stopped: np.ndarray

    @property
    def monotone(self) -> bool:
        return bool(np.all(np.diff(self.errors) < 0))

    def rows(self):
        return [(float(d), float(e), int(s)) for d, e, s in zip(self.deltas, self.errors, self.stopped)]


def _decreasing(deltas):
    deltas = np.asarray([float(d) for d in deltas])
    if deltas.size == 0 or np.any(deltas <= 0):
        raise ValueError("delta list must be non-empty and positive")
    if np.any(np.diff(deltas) >= 0):
        raise ValueError("delta list must be strictly decreasing")
    return deltas


def wz_study(spec: HamiltonianSpec, g: Graph, rho0, S0, *, seed, n_seeds, deltas, dt_w, substeps=2, T=1.0,
             executor=None) -> WzStudy:
    """Distance between Wong-Zakai solutions and a fine Heun reference on the same Brownian paths.

    Each row holds ``mean_p max_i |rho^WZ_i(T) - rho^ref_i(T)|`` for one ``delta``.
    The Wong-Zakai ODE is integrated with ``h = delta / substeps``; the
    reference uses Heun with ``h = dt_w``.
    """
    deltas = _decreasing(deltas)
    wiener = sample_wiener(seed, T, dt_w, paths=n_seeds)
    ref = integrate(FlowConfig(dt_w, T, Scheme.HEUN, audit=False, store_every=10**9), spec, g, rho0, S0, wiener)

    def run(delta):
        wz = WongZakaiPath(wiener, delta)
        cfg = FlowConfig(delta / substeps, T, Scheme.WONG_ZAKAI, audit=False, store_every=10**9)
        traj = integrate(cfg, spec, g, rho0, S0, wz)
        err = np.abs(traj.final_rho - ref.final_rho).max(axis=-1).mean()
        return err, int(np.count_nonzero(traj.stopped | ref.stopped))

    out = list(map(run, deltas) if executor is None else executor.map(run, deltas))
    return WzStudy(deltas, np.array([e for e, _ in out]), np.array([s for _, s in out]))


def strong_order(spec: HamiltonianSpec, g: Graph, rho0, S0, *, seed, n_seeds, steps, T=1.0):
    """Mean Heun / Ito-Euler distance at ``rho(T)`` for each step and the observed orders between them."""
    steps = np.asarray(steps, dtype=float)
    wiener = sample_wiener(seed, T, float(steps.min()), paths=n_seeds)
    dist = []
    for h in steps:
        a = integrate(FlowConfig(h, T, Scheme.HEUN, audit=False, store_every=10**9), spec, g, rho0, S0, wiener)
        b = integrate(FlowConfig(h, T, Scheme.ITO_EULER, audit=False, store_every=10**9), spec, g, rho0, S0, wiener)
        dist.append(np.abs(a.final_rho - b.final_rho).max(axis=-1).mean())
    dist = np.array(dist)
    orders = np.log(dist[:-1] / dist[1:]) / np.log(steps[:-1] / steps[1:])
    return dist, orders

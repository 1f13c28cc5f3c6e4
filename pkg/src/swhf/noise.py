"""Seeded scalar Brownian paths and their piecewise-linear (Wong-Zakai) interpolants.

Each ensemble member ``k`` of a master seed draws from its own stream
``SeedSequence(seed, spawn_key=(k,))``, so member ``k`` is the same path
whether it is sampled alone or as part of a batch.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

__all__ = ["WienerPath", "WongZakaiPath", "sample_wiener", "grid_count"]


def grid_count(T, step, what="step"):
    """Number of steps of size ``step`` in ``[0, T]``; raise unless ``step`` divides ``T``."""
    if not (np.isfinite(T) and np.isfinite(step)) or T <= 0 or step <= 0:
        raise ValueError(f"horizon and {what} must be positive, got T={T}, {what}={step}")
    k = int(round(T / step))
    if k < 1 or abs(k * step - T) > 1e-9 * max(T, 1.0):
        raise ValueError(f"{what}={step} does not divide T={T}")
    return k


@dataclass(frozen=True)
class WienerPath:
    """Brownian values on the grid ``t_k = k * dt`` of ``[0, T]``.

    ``values`` has shape ``(K + 1,)`` for a single path or ``(P, K + 1)``
    for an ensemble of ``P`` members.
    """

    seed: int
    T: float
    dt: float
    values: np.ndarray
    members: tuple = (0,)

    @property
    def n_steps(self) -> int:
        return self.values.shape[-1] - 1

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt

    @property
    def batched(self) -> bool:
        return self.values.ndim == 2

    def member(self, i: int) -> "WienerPath":
        if not self.batched:
            return self
        return WienerPath(self.seed, self.T, self.dt, self.values[i], (self.members[i],))

    def _check_time(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < -1e-12 * self.T) or np.any(t > self.T * (1 + 1e-12)):
            raise ValueError(f"time outside [0, {self.T}]")
        return np.clip(t, 0.0, self.T)

    def value(self, t):
        """``W(t)``; exact at grid points, linear in between."""
        t = self._check_time(t)
        x = t / self.dt
        k = np.clip(np.floor(x + 1e-9).astype(int), 0, self.n_steps)
        frac = np.where(k < self.n_steps, x - k, 0.0)
        frac = np.where(np.abs(frac) < 1e-9, 0.0, frac)
        k1 = np.minimum(k + 1, self.n_steps)
        w0 = self.values[..., k]
        w1 = self.values[..., k1]
        return w0 + frac * (w1 - w0)

    def increment(self, t0, t1):
        return self.value(t1) - self.value(t0)


def sample_wiener(seed: int, T: float, dt: float, paths=None, member: int = 0) -> WienerPath:
    """Sample a Brownian path (``paths=None``) or members ``0..paths-1`` of an ensemble."""
    n = grid_count(T, dt, "dt_w")
    seed = int(seed)
    if seed < 0:
        raise ValueError("seed must be non-negative")
    members = (member,) if paths is None else tuple(range(int(paths)))
    if not members:
        raise ValueError("paths must be positive")
    rows = []
    for k in members:
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(k,)))
        inc = rng.standard_normal(n) * np.sqrt(dt)
        rows.append(np.concatenate(([0.0], np.cumsum(inc))))
    values = rows[0] if paths is None else np.vstack(rows)
    return WienerPath(seed, float(T), float(dt), values, members)


@dataclass(frozen=True)
class WongZakaiPath:
    """Linear interpolation of a :class:`WienerPath` between knots ``k * delta``."""

    wiener: WienerPath
    delta: float

    def __post_init__(self):
        ratio = self.delta / self.wiener.dt
        if self.delta <= 0 or abs(ratio - round(ratio)) > 1e-9 * max(ratio, 1.0) or round(ratio) < 1:
            raise ValueError(f"delta={self.delta} must be a positive multiple of dt_w={self.wiener.dt}")
        grid_count(self.wiener.T, self.delta, "delta")

    @property
    def T(self) -> float:
        return self.wiener.T

    @property
    def n_knots(self) -> int:
        return int(round(self.T / self.delta))

    @property
    def knot_values(self) -> np.ndarray:
        stride = int(round(self.delta / self.wiener.dt))
        return self.wiener.values[..., ::stride]

    def _interval(self, t):
        t = self.wiener._check_time(t)
        x = t / self.delta
        k = np.floor(x + 1e-9).astype(int)
        # slope is right-continuous; the final knot reuses the last interval
        return t, np.clip(k, 0, self.n_knots - 1)

    def value(self, t):
        t, k = self._interval(t)
        kv = self.knot_values
        w0, w1 = kv[..., k], kv[..., k + 1]
        return w0 + (t - k * self.delta) / self.delta * (w1 - w0)

    def slope(self, t):
        _, k = self._interval(t)
        kv = self.knot_values
        return (kv[..., k + 1] - kv[..., k]) / self.delta

    def mean_slope(self, t0, t1):
        """``(W_delta(t1) - W_delta(t0)) / (t1 - t0)``."""
        return (self.value(t1) - self.value(t0)) / (t1 - t0)

    def to_csv(self, path, header_comment=None):
        """Write ``t, W, W_delta, slope`` on the Brownian grid of a single path."""
        if self.wiener.batched:
            raise ValueError("export a single ensemble member")
        t = self.wiener.times
        with open(path, "w", newline="", encoding="utf-8") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "W", "W_delta", "slope"])
            for row in zip(t, self.wiener.values, self.value(t), self.slope(t)):
                w.writerow([f"{x:.17g}" for x in row])

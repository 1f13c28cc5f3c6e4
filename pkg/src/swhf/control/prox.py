"""Proximal map of the perspective function ``b^2 / (2a)``."""

from __future__ import annotations

import numpy as np

__all__ = ["perspective_prox"]


def perspective_prox(a0, b0, gamma, max_iter=60):
    """Minimise ``gamma b^2/(2a) + |a - a0|^2/2 + |b - b0|^2/2`` over ``a >= 0``.

    The minimiser is ``(0, 0)`` when ``a0 + b0^2/(2 gamma) <= 0``.  Otherwise
    ``a`` is the root of ``(a - a0)(a + gamma)^2 = gamma b0^2 / 2`` in ``a > 0``
    and ``b = b0 a / (a + gamma)``.  The cubic is convex and increasing to the
    right of its root, so Newton started at ``max(a0, 0) + b0^2/(2 gamma)``
    decreases monotonically onto it.
    """
    a0, b0, gamma = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (a0, b0, gamma)))
    shape = a0.shape
    a0, b0, gamma = (x.reshape(-1) for x in (a0, b0, gamma))
    rhs = 0.5 * gamma * b0**2
    active = a0 + b0**2 / (2.0 * gamma) > 0
    a = np.where(active, np.maximum(a0, 0.0) + b0**2 / (2.0 * gamma), 0.0)
    todo = active & (b0 != 0)
    a = np.where(active & (b0 == 0), np.maximum(a0, 0.0), a)
    for _ in range(max_iter):
        if not np.any(todo):
            break
        at = a[todo]
        ag = at + gamma[todo]
        f = (at - a0[todo]) * ag**2 - rhs[todo]
        df = ag**2 + 2.0 * (at - a0[todo]) * ag
        new = at - f / df
        # monotone from the right; stop once the decrease stalls
        new = np.maximum(new, 0.0)
        done = new >= at * (1 - 4e-16) - 1e-300
        a[todo] = np.minimum(new, at)
        idx = np.flatnonzero(todo)
        todo[idx[done]] = False
    b = np.where(active, b0 * a / (a + gamma), 0.0)
    if not shape:
        return float(a[0]), float(b[0])
    return a.reshape(shape), b.reshape(shape)

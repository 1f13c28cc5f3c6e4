"""Time integration of the stochastic Wasserstein Hamiltonian flow.

The state ``x = (rho, S)`` obeys

    d rho =  dH0/dS dt + dH1/dS o dW
    d S   = -dH0/drho dt - dH1/drho o dW

in the Stratonovich sense.  Three one-step schemes are provided:

``wong-zakai``
    classical RK4 on the ODE driven by the piecewise-linear path ``W_delta``;
    the slope is frozen on each step, so steps must not straddle knots.
``heun``
    stochastic trapezoidal predictor-corrector, consistent with Stratonovich.
``ito-euler``
    Euler-Maruyama on the Ito form (drift plus ``ito_correction``).

All routines work on a batch of paths: ``rho`` and ``S`` have shape
``(P, N)`` and the noise supplies one Brownian path per row.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .energy import HamiltonianSpec, energy_value, grad_rho, grad_S, hessian_blocks
from .errors import BoundaryDensityError, IntegrationError
from .graph import Graph, check_density
from .noise import WienerPath, WongZakaiPath

__all__ = [
    "Scheme",
    "FlowConfig",
    "Trajectory",
    "AuditReport",
    "ito_correction",
    "vector_fields",
    "step",
    "integrate",
    "energy_audit",
]

RECENTER_TOL = 1e-12


class Scheme(enum.Enum):
    WONG_ZAKAI = "wong-zakai"
    HEUN = "heun"
    ITO_EULER = "ito-euler"

    @classmethod
    def parse(cls, value) -> "Scheme":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        aliases = {"wz": "wong-zakai", "wz-ode": "wong-zakai", "stratonovich-heun": "heun", "ito": "ito-euler"}
        key = aliases.get(key, key)
        for item in cls:
            if item.value == key:
                return item
        raise ValueError(f"unknown scheme {value!r}")


@dataclass(frozen=True)
class FlowConfig:
    h: float
    T: float = 1.0
    scheme: Scheme = Scheme.HEUN
    rho_min: float = 1e-8
    S_max: float = 1e8
    audit: bool = True
    store_every: int = 10

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme.parse(self.scheme))
        if not (self.h > 0 and self.T > 0):
            raise ValueError("step h and horizon T must be positive")
        if self.rho_min < 0 or self.S_max <= 0:
            raise ValueError("stopping thresholds must satisfy rho_min >= 0, S_max > 0")
        if int(self.store_every) < 1:
            raise ValueError("store_every must be >= 1")

    @property
    def n_steps(self) -> int:
        n = int(round(self.T / self.h))
        if abs(n * self.h - self.T) > 1e-9 * self.T:
            raise ValueError(f"step h={self.h} does not divide T={self.T}")
        return n


@dataclass
class Trajectory:
    """Stored states of a batch of paths; arrays are indexed ``[time, path, node]``."""

    times: np.ndarray
    rho: np.ndarray
    S: np.ndarray
    stopped: np.ndarray
    tau: np.ndarray
    reason: list
    min_rho: np.ndarray
    H0: np.ndarray | None = None
    H1: np.ndarray | None = None
    config: FlowConfig | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n_paths(self) -> int:
        return self.rho.shape[1]

    @property
    def final_rho(self) -> np.ndarray:
        return self.rho[-1]

    @property
    def final_S(self) -> np.ndarray:
        return self.S[-1]


# ---------------------------------------------------------------------------
# vector fields


def _matvec(A, x):
    return np.einsum("...ij,...j->...i", A, x)


def ito_correction(spec: HamiltonianSpec, g: Graph, rho, S):
    """Stratonovich-to-Ito drift correction ``1/2 (Dg) g`` with ``g = (dH1/dS, -dH1/drho)``."""
    rho = np.asarray(rho, dtype=float)
    S = np.asarray(S, dtype=float)
    h1 = spec.h1
    shape = np.broadcast_shapes(rho.shape, S.shape)
    if h1.is_zero:
        return np.zeros(shape), np.zeros(shape)
    if h1.singular and np.any(rho <= 0):
        raise BoundaryDensityError("Ito correction needs an interior density")
    gS = grad_S(h1, g, rho, S)
    gR = grad_rho(h1, g, rho, S)
    hb = hessian_blocks(h1, g, rho, S)
    c_rho = 0.5 * _matvec(hb.SR, gS) - 0.5 * _matvec(hb.SS, gR)
    c_S = 0.5 * _matvec(np.swapaxes(hb.SR, -1, -2), gR) - 0.5 * _matvec(hb.RR, gS)
    return _recenter(c_rho), c_S


def _recenter(d_rho):
    total = np.sum(d_rho, axis=-1, keepdims=True)
    if np.any(np.abs(total) > RECENTER_TOL):
        d_rho = d_rho - total / d_rho.shape[-1]
    return d_rho


def vector_fields(spec: HamiltonianSpec, g: Graph, rho, S, *, correction=False):
    """Drift ``f`` and diffusion ``b`` as ``((f_rho, f_S), (b_rho, b_S))``.

    With ``correction=True`` the Ito correction is added to the drift.
    """
    f_rho = grad_S(spec.h0, g, rho, S)
    f_S = -grad_rho(spec.h0, g, rho, S)
    if spec.h1.is_zero:
        z = np.zeros_like(f_rho)
        return (f_rho, f_S), (z, z.copy())
    b_rho = grad_S(spec.h1, g, rho, S)
    b_S = -grad_rho(spec.h1, g, rho, S)
    if correction:
        c_rho, c_S = ito_correction(spec, g, rho, S)
        f_rho = f_rho + c_rho
        f_S = f_S + c_S
    return (f_rho, f_S), (b_rho, b_S)


def _guarded_fields(spec, g, rho, S, correction=False):
    """Evaluate fields row by row safely; rows where singular terms meet the boundary are flagged."""
    singular = spec.h0.singular or spec.h1.singular
    bad = np.zeros(rho.shape[0], dtype=bool)
    if singular:
        bad = ~np.all(rho > 0, axis=-1)
        if np.any(bad):
            rho = np.where(bad[:, None], 1.0 / rho.shape[-1], rho)
    (f_rho, f_S), (b_rho, b_S) = vector_fields(spec, g, rho, S, correction=correction)
    if np.any(bad):
        m = bad[:, None]
        f_rho, f_S, b_rho, b_S = (np.where(m, 0.0, a) for a in (f_rho, f_S, b_rho, b_S))
    return f_rho, f_S, b_rho, b_S, bad


# ---------------------------------------------------------------------------
# one-step schemes


def _noise_source(scheme, noise):
    if scheme is Scheme.WONG_ZAKAI:
        if not isinstance(noise, WongZakaiPath):
            raise TypeError("the Wong-Zakai scheme needs a WongZakaiPath")
        return noise
    return noise.wiener if isinstance(noise, WongZakaiPath) else noise


def _noise_increment(scheme, noise, t, h, n_paths):
    """Per-path ``dW`` over ``[t, t + h]`` (the interpolated one for Wong-Zakai)."""
    if noise is None:
        return np.zeros(n_paths)
    src = _noise_source(scheme, noise)
    dw = src.value(t + h) - src.value(t)
    return np.broadcast_to(np.asarray(dw, dtype=float), (n_paths,))


def _advance(scheme, spec, g, rho, S, h, dw):
    """One step for every row; returns ``(rho, S, bad)``."""
    col = dw[:, None]
    if scheme is Scheme.WONG_ZAKAI:
        slope = col / h

        def field_at(r, s):
            f_r, f_s, b_r, b_s, bad = _guarded_fields(spec, g, r, s)
            return f_r + slope * b_r, f_s + slope * b_s, bad

        k1r, k1s, bad1 = field_at(rho, S)
        k2r, k2s, bad2 = field_at(rho + 0.5 * h * k1r, S + 0.5 * h * k1s)
        k3r, k3s, bad3 = field_at(rho + 0.5 * h * k2r, S + 0.5 * h * k2s)
        k4r, k4s, bad4 = field_at(rho + h * k3r, S + h * k3s)
        d_rho = h / 6.0 * (k1r + 2 * k2r + 2 * k3r + k4r)
        d_S = h / 6.0 * (k1s + 2 * k2s + 2 * k3s + k4s)
        bad = bad1 | bad2 | bad3 | bad4
    elif scheme is Scheme.HEUN:
        f_r, f_s, b_r, b_s, bad1 = _guarded_fields(spec, g, rho, S)
        pr = rho + h * f_r + col * b_r
        ps = S + h * f_s + col * b_s
        f2r, f2s, b2r, b2s, bad2 = _guarded_fields(spec, g, pr, ps)
        d_rho = 0.5 * h * (f_r + f2r) + 0.5 * col * (b_r + b2r)
        d_S = 0.5 * h * (f_s + f2s) + 0.5 * col * (b_s + b2s)
        bad = bad1 | bad2
    else:
        f_r, f_s, b_r, b_s, bad = _guarded_fields(spec, g, rho, S, correction=True)
        d_rho = h * f_r + col * b_r
        d_S = h * f_s + col * b_s
    return rho + _recenter(d_rho), S + d_S, bad


def _check_alignment(scheme, noise, h):
    if noise is None:
        return
    if scheme is Scheme.WONG_ZAKAI:
        r = noise.delta / h
        if abs(r - round(r)) > 1e-9 * max(r, 1.0):
            raise ValueError(f"step h={h} must divide the Wong-Zakai width delta={noise.delta}")
    else:
        wiener = noise.wiener if isinstance(noise, WongZakaiPath) else noise
        r = h / wiener.dt
        if abs(r - round(r)) > 1e-9 * max(r, 1.0) or round(r) < 1:
            raise ValueError(f"step h={h} must be a multiple of the Brownian grid dt={wiener.dt}")


def step(scheme, spec: HamiltonianSpec, g: Graph, state, t, h, noise=None):
    """Advance ``state = (rho, S)`` from ``t`` to ``t + h``.

    ``noise`` is a :class:`WongZakaiPath` for the Wong-Zakai scheme and a
    :class:`WienerPath` (or a Wong-Zakai path, whose Brownian path is used)
    otherwise; ``None`` means no noise.
    """
    scheme = Scheme.parse(scheme)
    rho, S = (np.asarray(a, dtype=float) for a in state)
    single = rho.ndim == 1
    rho2, S2 = np.atleast_2d(rho), np.atleast_2d(S)
    rho2, S2 = np.broadcast_arrays(rho2, S2)
    dw = _noise_increment(scheme, noise, t, h, rho2.shape[0])
    if dw.shape[0] != rho2.shape[0]:
        rho2 = np.broadcast_to(rho2, (dw.shape[0], rho2.shape[1]))
        S2 = np.broadcast_to(S2, (dw.shape[0], S2.shape[1]))
    with np.errstate(all="ignore"):
        new_rho, new_S, bad = _advance(scheme, spec, g, rho2, S2, h, dw)
    if np.any(bad):
        raise BoundaryDensityError("step evaluated a singular energy on the simplex boundary")
    if not (np.all(np.isfinite(new_rho)) and np.all(np.isfinite(new_S))):
        raise IntegrationError("non-finite state", time=t, step=None, path=None)
    if single and new_rho.shape[0] == 1:
        return new_rho[0], new_S[0]
    return new_rho, new_S


# ---------------------------------------------------------------------------
# trajectories


def _energies(spec, g, rho, S):
    """Rowwise ``(H0, H1)``; NaN where singular terms meet the boundary."""
    singular = spec.h0.singular or spec.h1.singular
    bad = ~np.all(rho > 0, axis=-1) if singular else np.zeros(rho.shape[0], dtype=bool)
    r = np.where(bad[:, None], 1.0 / rho.shape[-1], rho)
    h0 = np.where(bad, np.nan, energy_value(spec.h0, g, r, S))
    h1 = np.where(bad, np.nan, energy_value(spec.h1, g, r, S))
    return h0, h1


def _n_paths(noise):
    if noise is None:
        return None
    wiener = noise.wiener if isinstance(noise, WongZakaiPath) else noise
    return wiener.values.shape[0] if wiener.batched else 1


def integrate(config: FlowConfig, spec: HamiltonianSpec, g: Graph, rho0, S0, noise=None) -> Trajectory:
    """Integrate to ``T`` or to the stopping time of each path.

    A path stops when ``min_i rho_i <= rho_min`` (``density_floor``) or
    ``max_i |S_i| >= S_max`` (``potential_blowup``); stopped paths are frozen.
    ``tau`` is ``inf`` for paths that reach ``T``.
    """
    scheme = config.scheme
    if noise is not None and isinstance(noise, WienerPath) and scheme is Scheme.WONG_ZAKAI:
        raise TypeError("the Wong-Zakai scheme needs a WongZakaiPath")
    _check_alignment(scheme, noise, config.h)
    rho0 = np.atleast_2d(np.asarray(rho0, dtype=float))
    S0 = np.atleast_2d(np.asarray(S0, dtype=float))
    for r in rho0:
        check_density(r, g.n, interior=True)
    P = _n_paths(noise) or max(rho0.shape[0], S0.shape[0])
    rho = np.array(np.broadcast_to(rho0, (P, g.n)))
    S = np.array(np.broadcast_to(S0, (P, g.n)))
    if not np.all(np.isfinite(S)):
        raise ValueError("S0 must be finite")

    n_steps = config.n_steps
    h = config.h
    stopped = np.zeros(P, dtype=bool)
    tau = np.full(P, np.inf)
    reason = ["none"] * P
    min_rho = rho.min(axis=-1)

    if noise is None:
        dws = np.zeros((n_steps, P))
    else:
        W = _noise_source(scheme, noise).value(np.arange(n_steps + 1) * h)
        dws = np.broadcast_to(np.diff(W, axis=-1).T.reshape(n_steps, -1), (n_steps, P))

    times, rhos, Ss = [0.0], [rho.copy()], [S.copy()]
    with np.errstate(all="ignore"):
        for n in range(n_steps):
            t = n * h
            if not np.all(stopped):
                dw = dws[n]
                new_rho, new_S, bad = _advance(scheme, spec, g, rho, S, h, dw)
                active = ~stopped
                finite = np.all(np.isfinite(new_rho), axis=-1) & np.all(np.isfinite(new_S), axis=-1)
                broken = active & ~bad & ~finite
                if np.any(broken):
                    p = int(np.flatnonzero(broken)[0])
                    raise IntegrationError(
                        f"non-finite state on path {p} at t={t + h:.6g}", time=t + h, step=n + 1, path=p
                    )
                # a step that leaves the simplex is rejected; the path stops at its start
                bad = bad | ~(new_rho.min(axis=-1) > 0)
                accept = active & ~bad
                rho[accept] = new_rho[accept]
                S[accept] = new_S[accept]
                min_rho = np.where(accept, np.minimum(min_rho, rho.min(axis=-1)), min_rho)
                floor = active & (bad | (rho.min(axis=-1) <= config.rho_min))
                blow = active & ~floor & (np.abs(S).max(axis=-1) >= config.S_max)
                for p in np.flatnonzero(floor | blow):
                    tau[p] = t + h
                    reason[p] = "density_floor" if floor[p] else "potential_blowup"
                stopped |= floor | blow
            if (n + 1) % config.store_every == 0 or n + 1 == n_steps:
                times.append((n + 1) * h)
                rhos.append(rho.copy())
                Ss.append(S.copy())

    rho_t = np.stack(rhos)
    S_t = np.stack(Ss)
    traj = Trajectory(
        times=np.array(times),
        rho=rho_t,
        S=S_t,
        stopped=stopped,
        tau=tau,
        reason=reason,
        min_rho=min_rho,
        config=config,
    )
    if config.audit:
        pairs = [_energies(spec, g, r, s) for r, s in zip(rho_t, S_t)]
        traj.H0 = np.stack([p[0] for p in pairs])
        traj.H1 = np.stack([p[1] for p in pairs])
    return traj


# ---------------------------------------------------------------------------
# energy audit


@dataclass
class AuditReport:
    """``H0(t) - H0(0)`` against the accumulated right-hand side of its chain rule."""

    times: np.ndarray
    H0: np.ndarray
    predicted: np.ndarray
    residual: np.ndarray
    max_residual: float
    max_drift: float


def _rates(spec, g, rho, S):
    """Rowwise rates of ``H0`` along the drift and along the noise direction.

    The drift rate is ``{H0, H0} = 0`` analytically; it is evaluated anyway so
    that integrator error shows up in the audit.  The noise rate is ``{H0, H1}``.
    """
    d0r = grad_rho(spec.h0, g, rho, S)
    d0s = grad_S(spec.h0, g, rho, S)
    (f_r, f_s), (b_r, b_s) = vector_fields(spec, g, rho, S)
    return np.sum(d0r * f_r + d0s * f_s, axis=-1), np.sum(d0r * b_r + d0s * b_s, axis=-1)


def energy_audit(spec: HamiltonianSpec, g: Graph, traj: Trajectory, noise=None) -> AuditReport:
    """Compare ``H0(t) - H0(0)`` with trapezoidal sums of its Stratonovich chain rule.

    Between stored times ``t_a < t_b`` the increment is predicted by
    ``(d_a + d_b)/2 (t_b - t_a) + (b_a + b_b)/2 (W(t_b) - W(t_a))`` with ``d``
    the drift rate and ``b = {H0, H1}``; the trapezoid on ``b`` reproduces the
    Ito correction to leading order.  Wong-Zakai trajectories use ``W_delta``.
    Entries after a path's stopping time are NaN.
    """
    scheme = traj.config.scheme if traj.config is not None else Scheme.HEUN
    times = traj.times
    P = traj.n_paths
    if noise is None:
        W = np.zeros((len(times), P))
    else:
        if scheme is Scheme.WONG_ZAKAI:
            src = noise
        else:
            src = noise.wiener if isinstance(noise, WongZakaiPath) else noise
        W = np.stack([np.broadcast_to(src.value(t), (P,)) for t in times])
    H0 = traj.H0 if traj.H0 is not None else np.stack([_energies(spec, g, r, s)[0] for r, s in zip(traj.rho, traj.S)])
    drift, noise_rate = [], []
    with np.errstate(all="ignore"):
        for r, s in zip(traj.rho, traj.S):
            ok = np.all(r > 0, axis=-1) | ~(spec.h0.singular or spec.h1.singular)
            rr = np.where(ok[:, None], r, 1.0 / g.n)
            d, b = _rates(spec, g, rr, s)
            drift.append(np.where(ok, d, np.nan))
            noise_rate.append(np.where(ok, b, np.nan))
    drift = np.stack(drift)
    noise_rate = np.stack(noise_rate)
    dt = np.diff(times)[:, None]
    dW = np.diff(W, axis=0)
    inc = 0.5 * (drift[1:] + drift[:-1]) * dt + 0.5 * (noise_rate[1:] + noise_rate[:-1]) * dW
    predicted = np.vstack([np.zeros((1, P)), np.cumsum(inc, axis=0)])
    residual = (H0 - H0[0]) - predicted
    alive = times[:, None] < traj.tau[None, :]
    alive[0] = True
    residual = np.where(alive, residual, np.nan)
    drift_H = np.where(alive, H0 - H0[0], np.nan)
    return AuditReport(
        times=times,
        H0=H0,
        predicted=predicted,
        residual=residual,
        max_residual=float(np.nanmax(np.abs(residual))),
        max_drift=float(np.nanmax(np.abs(drift_H))),
    )

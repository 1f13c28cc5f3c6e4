"""Energy functionals on the density manifold of a graph.

An energy is a linear combination

    E(rho, S) = k * K(S, rho) + f * I(rho) + <v, rho> + 1/2 <rho, W rho> - e * L(rho)

of the kinetic energy ``K``, Fisher information ``I``, a linear potential, an
interaction potential and the entropy ``L``.  The dominated Hamiltonian
``H0`` and the noise Hamiltonian ``H1`` are both of this form; see
:class:`HamiltonianSpec`.

Exact first and second derivatives are assembled edge by edge from the
partial derivatives of the mean ``Theta``, so they hold for either mean.
All functions broadcast over leading batch axes of ``rho`` and ``S``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import BoundaryDensityError
from .graph import Graph, ThetaKind

__all__ = [
    "EnergyPart",
    "HamiltonianSpec",
    "HessianBlocks",
    "kinetic",
    "fisher",
    "entropy",
    "energy_value",
    "hamiltonian_value",
    "grad_S",
    "grad_rho",
    "hessian_blocks",
    "poisson_bracket",
]


class HessianBlocks(NamedTuple):
    """Second derivatives of an energy; ``SR[..., i, j] = d2E / dS_i drho_j``."""

    SS: np.ndarray
    SR: np.ndarray
    RR: np.ndarray


@dataclass(frozen=True)
class EnergyPart:
    """Coefficients of one energy functional (already multiplied out)."""

    kinetic: float = 0.0
    fisher: float = 0.0
    entropy: float = 0.0
    linear: np.ndarray | None = None
    interaction: np.ndarray | None = None
    theta: ThetaKind = ThetaKind.ARITHMETIC
    theta_tilde: ThetaKind = ThetaKind.LOGARITHMIC

    @property
    def singular(self) -> bool:
        """True when the energy contains a term that is singular on the boundary."""
        return self.fisher != 0.0 or self.entropy != 0.0

    @property
    def is_zero(self) -> bool:
        return (
            self.kinetic == 0.0
            and self.fisher == 0.0
            and self.entropy == 0.0
            and (self.linear is None or not np.any(self.linear))
            and (self.interaction is None or not np.any(self.interaction))
        )

    def scaled(self, c: float) -> "EnergyPart":
        return EnergyPart(
            kinetic=c * self.kinetic,
            fisher=c * self.fisher,
            entropy=c * self.entropy,
            linear=None if self.linear is None else c * np.asarray(self.linear),
            interaction=None if self.interaction is None else c * np.asarray(self.interaction),
            theta=self.theta,
            theta_tilde=self.theta_tilde,
        )


def _vec(x, n, name):
    if x is None:
        return None
    arr = np.asarray(x, dtype=float).reshape(-1)
    if arr.shape != (n,):
        raise ValueError(f"{name} must have {n} entries, got {arr.shape}")
    return arr


@dataclass(frozen=True)
class HamiltonianSpec:
    """Coefficients of the pair ``(H0, H1)``.

    ``H0 = a_k K + beta I + V(rho) + W(rho) - alpha L`` and
    ``H1 = eta1 K + eta2 I + eta3 V(rho) + eta4 W(rho) - eta5 L``, where the
    linear term of ``H1`` becomes ``<sigma, rho>`` when ``sigma`` is given.
    """

    n: int
    a_k: float = 1.0
    beta: float = 0.0
    alpha: float = 0.0
    v: np.ndarray | None = None
    w: np.ndarray | None = None
    eta1: float = 0.0
    eta2: float = 0.0
    eta3: float = 0.0
    eta4: float = 0.0
    eta5: float = 0.0
    sigma: np.ndarray | None = None
    theta: ThetaKind = ThetaKind.ARITHMETIC
    theta_tilde: ThetaKind = ThetaKind.LOGARITHMIC
    _parts: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "theta", ThetaKind.parse(self.theta))
        object.__setattr__(self, "theta_tilde", ThetaKind.parse(self.theta_tilde))
        object.__setattr__(self, "v", _vec(self.v, self.n, "v"))
        object.__setattr__(self, "sigma", _vec(self.sigma, self.n, "sigma"))
        if self.w is not None:
            w = np.asarray(self.w, dtype=float)
            if w.shape != (self.n, self.n):
                raise ValueError(f"w must be {self.n}x{self.n}")
            if not np.allclose(w, w.T, rtol=0, atol=1e-14):
                raise ValueError("interaction matrix w must be symmetric")
            object.__setattr__(self, "w", w)
        kinds = dict(theta=self.theta, theta_tilde=self.theta_tilde)
        h0 = EnergyPart(
            kinetic=float(self.a_k),
            fisher=float(self.beta),
            entropy=float(self.alpha),
            linear=self.v,
            interaction=self.w,
            **kinds,
        )
        lin1 = self.sigma if self.sigma is not None else (None if self.v is None else self.eta3 * self.v)
        h1 = EnergyPart(
            kinetic=float(self.eta1),
            fisher=float(self.eta2),
            entropy=float(self.eta5),
            linear=lin1,
            interaction=None if self.w is None else self.eta4 * self.w,
            **kinds,
        )
        object.__setattr__(self, "_parts", (h0, h1))

    @property
    def h0(self) -> EnergyPart:
        return self._parts[0]

    @property
    def h1(self) -> EnergyPart:
        return self._parts[1]

    @property
    def has_noise(self) -> bool:
        return not self.h1.is_zero

    @classmethod
    def from_mapping(cls, doc: dict, n: int) -> "HamiltonianSpec":
        """Read ``{"h0": {a_k, beta, alpha, v, w}, "h1": {eta1..eta5, sigma}, "theta", "theta_tilde"}``."""
        h0 = dict(doc.get("h0", {}))
        h1 = dict(doc.get("h1", {}))
        known0 = {"a_k", "beta", "alpha", "v", "w"}
        known1 = {"eta1", "eta2", "eta3", "eta4", "eta5", "sigma"}
        bad = [f"h0.{k}" for k in h0 if k not in known0] + [f"h1.{k}" for k in h1 if k not in known1]
        if bad:
            from .errors import ConfigError

            raise ConfigError(f"unknown Hamiltonian fields: {', '.join(bad)}", bad)
        return cls(
            n=n,
            a_k=float(h0.get("a_k", 1.0)),
            beta=float(h0.get("beta", 0.0)),
            alpha=float(h0.get("alpha", 0.0)),
            v=h0.get("v"),
            w=h0.get("w"),
            sigma=h1.get("sigma"),
            theta=doc.get("theta", "arithmetic"),
            theta_tilde=doc.get("theta_tilde", "logarithmic"),
            **{k: float(h1.get(k, 0.0)) for k in ("eta1", "eta2", "eta3", "eta4", "eta5")},
        )

    def to_mapping(self) -> dict:
        def lst(a):
            return None if a is None else np.asarray(a).tolist()

        h0 = {"a_k": self.a_k, "beta": self.beta, "alpha": self.alpha}
        if self.v is not None:
            h0["v"] = lst(self.v)
        if self.w is not None:
            h0["w"] = lst(self.w)
        h1 = {f"eta{k}": getattr(self, f"eta{k}") for k in range(1, 6)}
        if self.sigma is not None:
            h1["sigma"] = lst(self.sigma)
        return {"h0": h0, "h1": h1, "theta": self.theta.value, "theta_tilde": self.theta_tilde.value}


# ---------------------------------------------------------------------------
# elementary functionals


def kinetic(g: Graph, rho, S, kind=ThetaKind.ARITHMETIC):
    """Kinetic energy ``1/2 <grad S, grad S>_theta(rho)``."""
    th = g.edge_theta(rho, kind)
    return 0.5 * np.sum(g.omega * th * g.diff(S) ** 2, axis=-1)


def fisher(g: Graph, rho, kind=ThetaKind.LOGARITHMIC):
    """Discrete Fisher information; ``+inf`` if any node carries zero mass."""
    rho = np.asarray(rho, dtype=float)
    boundary = np.any(rho <= 0, axis=-1)
    safe = np.where(rho > 0, rho, 1.0)
    logs = np.log(safe)
    kind = ThetaKind.parse(kind)
    if kind is ThetaKind.LOGARITHMIC:
        # log-mean times squared log difference collapses to a product
        val = np.sum(g.omega_tilde * g.diff(logs) * g.diff(safe), axis=-1)
    else:
        val = np.sum(g.omega_tilde * g.diff(logs) ** 2 * g.edge_theta(safe, kind), axis=-1)
    return np.where(boundary, np.inf, val) if np.ndim(val) else (np.inf if boundary else float(val))


def entropy(rho):
    """``sum_i rho_i log rho_i - rho_i`` with ``0 log 0 = 0``."""
    rho = np.asarray(rho, dtype=float)
    safe = np.where(rho > 0, rho, 1.0)
    return np.sum(np.where(rho > 0, rho * np.log(safe), 0.0) - rho, axis=-1)


def _require_interior(part: EnergyPart, rho):
    if part.singular and np.any(np.asarray(rho) <= 0):
        raise BoundaryDensityError("Fisher/entropy terms are singular on the simplex boundary")


def energy_value(part: EnergyPart, g: Graph, rho, S):
    rho = np.asarray(rho, dtype=float)
    _require_interior(part, rho)
    out = np.zeros(rho.shape[:-1])
    if part.kinetic:
        out = out + part.kinetic * kinetic(g, rho, S, part.theta)
    if part.fisher:
        out = out + part.fisher * fisher(g, rho, part.theta_tilde)
    if part.entropy:
        out = out - part.entropy * entropy(rho)
    if part.linear is not None:
        out = out + rho @ part.linear
    if part.interaction is not None:
        out = out + 0.5 * np.einsum("...i,ij,...j->...", rho, part.interaction, rho)
    return out if out.ndim else float(out)


def hamiltonian_value(spec: HamiltonianSpec, g: Graph, rho, S):
    """Return ``(H0, H1)`` at ``(rho, S)``."""
    return energy_value(spec.h0, g, rho, S), energy_value(spec.h1, g, rho, S)


# ---------------------------------------------------------------------------
# derivatives


def _endpoints(g: Graph, x):
    x = np.asarray(x, dtype=float)
    return x[..., g.tails], x[..., g.heads]


def _to_nodes(g: Graph, at_tail, at_head):
    return np.asarray(at_tail) @ g.tail_matrix + np.asarray(at_head) @ g.head_matrix


def grad_S(part: EnergyPart, g: Graph, rho, S):
    """``dE/dS``; only the kinetic term depends on ``S``, so the entries sum to zero."""
    rho = np.asarray(rho, dtype=float)
    S = np.asarray(S, dtype=float)
    shape = np.broadcast_shapes(rho.shape, S.shape)
    if not part.kinetic:
        return np.zeros(shape)
    flux = part.kinetic * g.omega * g.edge_theta(rho, part.theta) * g.diff(S)
    return np.broadcast_to(g.scatter(flux), shape).copy()


def _fisher_edge_partials(g: Graph, rho, kind):
    """Per-edge ``g = l^2 Theta`` with ``l = log s - log t`` and its first derivatives."""
    s, t = _endpoints(g, rho)
    ell = np.log(s) - np.log(t)
    th = kind.value_of(s, t)
    th_s, th_t = kind.partials(s, t)
    g_s = 2.0 * ell * th / s + ell**2 * th_s
    g_t = -2.0 * ell * th / t + ell**2 * th_t
    return s, t, ell, th, th_s, th_t, g_s, g_t


def grad_rho(part: EnergyPart, g: Graph, rho, S):
    """``dE/drho`` (requires an interior density when singular terms are active)."""
    rho = np.asarray(rho, dtype=float)
    S = np.asarray(S, dtype=float)
    _require_interior(part, rho)
    shape = np.broadcast_shapes(rho.shape, S.shape)
    out = np.zeros(shape)
    if part.kinetic:
        s, t = _endpoints(g, rho)
        th_s, th_t = part.theta.partials(s, t)
        d2 = 0.5 * part.kinetic * g.omega * g.diff(S) ** 2
        out = out + _to_nodes(g, d2 * th_s, d2 * th_t)
    if part.fisher:
        if part.theta_tilde is ThetaKind.LOGARITHMIC:
            # l^2 Theta^L = l (s - t), whose partials need no mean derivatives
            s, t = _endpoints(g, rho)
            ell = np.log(s) - np.log(t)
            g_s = ell + 1.0 - t / s
            g_t = -ell + 1.0 - s / t
        else:
            *_, g_s, g_t = _fisher_edge_partials(g, rho, part.theta_tilde)
        c = part.fisher * g.omega_tilde
        out = out + _to_nodes(g, c * g_s, c * g_t)
    if part.entropy:
        out = out - part.entropy * np.log(rho)
    if part.linear is not None:
        out = out + part.linear
    if part.interaction is not None:
        out = out + rho @ part.interaction
    return out


def _edge_blocks(g: Graph, out, a_tt, a_th, a_ht, a_hh):
    """Add per-edge 2x2 blocks ``[[tt, th], [ht, hh]]`` (tail/head) into ``out[..., N, N]``."""
    T, H = g.tail_matrix, g.head_matrix
    for A, B, vals in ((T, T, a_tt), (T, H, a_th), (H, T, a_ht), (H, H, a_hh)):
        out += np.einsum("...e,ea,eb->...ab", vals, A, B)


def hessian_blocks(part: EnergyPart, g: Graph, rho, S) -> HessianBlocks:
    """Exact second derivatives of an energy at ``(rho, S)``."""
    rho = np.asarray(rho, dtype=float)
    S = np.asarray(S, dtype=float)
    _require_interior(part, rho)
    batch = np.broadcast_shapes(rho.shape, S.shape)[:-1]
    n = g.n
    SS = np.zeros(batch + (n, n))
    SR = np.zeros(batch + (n, n))
    RR = np.zeros(batch + (n, n))
    if part.kinetic:
        s, t = _endpoints(g, rho)
        kind = part.theta
        th = kind.value_of(s, t)
        th_s, th_t = kind.partials(s, t)
        th_ss, th_st, th_tt = kind.second_partials(s, t)
        cw = part.kinetic * g.omega
        d = g.diff(S)
        _edge_blocks(g, SS, cw * th, -cw * th, -cw * th, cw * th)
        _edge_blocks(g, SR, cw * d * th_s, cw * d * th_t, -cw * d * th_s, -cw * d * th_t)
        half = 0.5 * cw * d**2
        _edge_blocks(g, RR, half * th_ss, half * th_st, half * th_st, half * th_tt)
    if part.fisher:
        if part.theta_tilde is ThetaKind.LOGARITHMIC:
            s, t = _endpoints(g, rho)
            g_ss = 1.0 / s + t / s**2
            g_tt = 1.0 / t + s / t**2
            g_st = -1.0 / s - 1.0 / t
        else:
            s, t, ell, th, th_s, th_t, _, _ = _fisher_edge_partials(g, rho, part.theta_tilde)
            th_ss, th_st, th_tt = part.theta_tilde.second_partials(s, t)
            g_ss = 2.0 * th / s**2 - 2.0 * ell * th / s**2 + 4.0 * ell * th_s / s + ell**2 * th_ss
            g_tt = 2.0 * th / t**2 + 2.0 * ell * th / t**2 - 4.0 * ell * th_t / t + ell**2 * th_tt
            g_st = -2.0 * th / (s * t) + 2.0 * ell * th_t / s - 2.0 * ell * th_s / t + ell**2 * th_st
        c = part.fisher * g.omega_tilde
        _edge_blocks(g, RR, c * g_ss, c * g_st, c * g_st, c * g_tt)
    if part.entropy:
        idx = np.arange(n)
        RR[..., idx, idx] -= part.entropy / rho
    if part.interaction is not None:
        RR = RR + part.interaction
    return HessianBlocks(SS, SR, RR)


def poisson_bracket(a: EnergyPart, b: EnergyPart, g: Graph, rho, S):
    """``{A, B} = <dA/drho, dB/dS> - <dA/dS, dB/drho>``."""
    val = np.sum(
        grad_rho(a, g, rho, S) * grad_S(b, g, rho, S) - grad_S(a, g, rho, S) * grad_rho(b, g, rho, S),
        axis=-1,
    )
    return val if np.ndim(val) else float(val)

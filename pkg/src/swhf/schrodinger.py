"""Schrodinger equations on graphs in Madelung coordinates ``u = sqrt(rho) exp(i S)``.

Three noisy models are provided as presets of :class:`~swhf.energy.HamiltonianSpec`:

* ``common-noise``: cubic NLS with a multiplicative potential noise ``sigma u o dW``;
* ``logarithmic``: the same with the extra ``-u log|u|^2`` nonlinearity;
* ``dispersion``: the Laplacian term is driven by white noise.

Time stepping always happens in ``(rho, S)`` through :mod:`swhf.flow`; the
complex form is only used to cross-check the vector fields.
"""

from __future__ import annotations

import enum

import numpy as np

from .energy import HamiltonianSpec
from .errors import BoundaryDensityError, DensityError
from .flow import vector_fields
from .graph import Graph, ThetaKind

__all__ = [
    "NlsPreset",
    "preset_spec",
    "madelung_forward",
    "madelung_inverse",
    "graph_laplacian",
    "complex_drift",
    "complex_diffusion",
    "chain_rule",
    "madelung_fields",
]


class NlsPreset(enum.Enum):
    COMMON_NOISE = "common-noise"
    LOGARITHMIC = "logarithmic"
    DISPERSION = "dispersion"

    @classmethod
    def parse(cls, value) -> "NlsPreset":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        for item in cls:
            if item.value == key or item.name.lower().replace("_", "-") == key:
                return item
        raise ValueError(f"unknown preset {value!r}; expected one of {[p.value for p in cls]}")


def preset_spec(preset, n, v=None, w=None, sigma=None, theta=ThetaKind.ARITHMETIC,
                theta_tilde=ThetaKind.LOGARITHMIC) -> HamiltonianSpec:
    """Hamiltonian pair of a Schrodinger preset on ``n`` nodes.

    ``sigma`` is the noise potential of the two potential-noise presets; it
    is ignored by ``dispersion``, whose noise drives the kinetic part.
    """
    preset = NlsPreset.parse(preset)
    kinds = dict(theta=theta, theta_tilde=theta_tilde)
    if preset is NlsPreset.DISPERSION:
        return HamiltonianSpec(n=n, a_k=0.0, beta=0.0, v=v, w=w, eta1=1.0, eta2=0.125, **kinds)
    if sigma is None:
        sigma = np.zeros(n)
    alpha = 1.0 if preset is NlsPreset.LOGARITHMIC else 0.0
    return HamiltonianSpec(n=n, a_k=1.0, beta=0.125, alpha=alpha, v=v, w=w, sigma=sigma, **kinds)


def madelung_forward(u):
    """``(rho, S)`` with ``rho = |u|^2`` and ``S = arg u`` in ``(-pi, pi]``."""
    u = np.asarray(u, dtype=complex)
    amp = np.abs(u)
    if np.any(amp == 0):
        raise DensityError("phase undefined where the wave function vanishes")
    S = np.angle(u)
    S = np.where(S <= -np.pi, S + 2 * np.pi, S)
    return amp**2, S


def madelung_inverse(rho, S):
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0):
        raise BoundaryDensityError("wave function needs positive density at every node")
    return np.sqrt(rho) * np.exp(1j * np.asarray(S, dtype=float))


def _node_partial(g: Graph, kind: ThetaKind, rho):
    """``d theta_e / d rho_j`` at the endpoint ``j`` of each edge, as (tail, head) arrays."""
    s, t = rho[..., g.tails], rho[..., g.heads]
    return kind.partials(s, t)


def graph_laplacian(g: Graph, u, theta=ThetaKind.ARITHMETIC, theta_tilde=ThetaKind.LOGARITHMIC):
    """Nonlinear graph Laplacian of a nowhere-vanishing wave function.

    With ``a = Re log u`` and ``p = Im log u``,

        (Lap u)_j = -u_j ( [i sum w theta dp + sum w~ theta~ da] / rho_j
                           + sum w dtheta/drho_j dp^2 + sum w~ dtheta~/drho_j da^2 ),

    sums running over the neighbours of ``j`` with ``dp = p_j - p_l``.
    """
    u = np.asarray(u, dtype=complex)
    theta = ThetaKind.parse(theta)
    theta_tilde = ThetaKind.parse(theta_tilde)
    rho = np.abs(u) ** 2
    if np.any(rho == 0):
        raise DensityError("Laplacian needs a nowhere-vanishing wave function")
    logu = np.log(u)
    dp = g.diff(logu.imag)
    da = g.diff(logu.real)
    th = g.edge_theta(rho, theta)
    tht = g.edge_theta(rho, theta_tilde)
    # skew flux: node i gets +q, node j gets -q
    flux = (1j * g.omega * th * dp + g.omega_tilde * tht * da) @ g.incidence
    p_s, p_t = _node_partial(g, theta, rho)
    q_s, q_t = _node_partial(g, theta_tilde, rho)
    quad = (
        (g.omega * dp**2 * p_s) @ g.tail_matrix
        + (g.omega * dp**2 * p_t) @ g.head_matrix
        + (g.omega_tilde * da**2 * q_s) @ g.tail_matrix
        + (g.omega_tilde * da**2 * q_t) @ g.head_matrix
    )
    return -u * (flux / rho + quad)


def _potential_terms(u, v, w, logarithmic):
    rho = np.abs(u) ** 2
    out = np.zeros_like(u)
    if v is not None:
        out = out + u * np.asarray(v, dtype=float)
    if w is not None:
        out = out + u * (rho @ np.asarray(w, dtype=float))
    if logarithmic:
        out = out - u * np.log(rho)
    return out


def complex_drift(preset, g: Graph, u, v=None, w=None, theta=ThetaKind.ARITHMETIC,
                  theta_tilde=ThetaKind.LOGARITHMIC):
    """``dt`` coefficient of ``du`` in the complex form of a preset."""
    preset = NlsPreset.parse(preset)
    u = np.asarray(u, dtype=complex)
    rhs = _potential_terms(u, v, w, preset is NlsPreset.LOGARITHMIC)
    if preset is not NlsPreset.DISPERSION:
        rhs = rhs - 0.5 * graph_laplacian(g, u, theta, theta_tilde)
    return -1j * rhs


def complex_diffusion(preset, g: Graph, u, sigma=None, theta=ThetaKind.ARITHMETIC,
                      theta_tilde=ThetaKind.LOGARITHMIC):
    """``o dW`` coefficient of ``du`` in the complex form of a preset."""
    preset = NlsPreset.parse(preset)
    u = np.asarray(u, dtype=complex)
    if preset is NlsPreset.DISPERSION:
        return 0.5j * graph_laplacian(g, u, theta, theta_tilde)
    if sigma is None:
        return np.zeros_like(u)
    return -1j * np.asarray(sigma, dtype=float) * u


def chain_rule(u, d_rho, d_S):
    """Map a tangent vector ``(d rho, d S)`` to ``du = u (d rho / (2 rho) + i d S)``."""
    u = np.asarray(u, dtype=complex)
    rho = np.abs(u) ** 2
    return u * (np.asarray(d_rho) / (2.0 * rho) + 1j * np.asarray(d_S))


def madelung_fields(spec: HamiltonianSpec, g: Graph, u):
    """Drift and diffusion of the Hamiltonian flow pushed to the wave function."""
    rho, S = madelung_forward(u)
    (f_r, f_s), (b_r, b_s) = vector_fields(spec, g, rho, S)
    return chain_rule(u, f_r, f_s), chain_rule(u, b_r, b_s)

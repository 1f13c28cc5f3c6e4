"""Dynamic transport problems on a graph with Wong-Zakai common noise.

Time ``[0, 1]`` is cut into ``M`` intervals of width ``h``.  Densities live on
the ``M + 1`` grid points, fluxes ``m_k`` (one value per stored edge, oriented
tail to head) on the intervals.  With ``rho_bar_k`` the interval midpoint
density and ``dW_k`` the mean slope of ``W_delta`` over interval ``k``:

additive
    ``(rho_{k+1} - rho_k)/h + B^T m_k - dW_k B^T(w (B Sigma) theta(rho_bar_k)) = 0``
special
    ``(rho_{k+1} - rho_k)/h + (1 + eps dW_k) B^T m_k = 0``

where ``B^T q`` sends ``+q_e`` to the tail and ``-q_e`` to the head of ``e``.
The action is ``sum_k h sum_e m_{k,e}^2 / (2 w_e theta_e(rho_bar_k))``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from ..errors import DegenerateNoiseError
from ..graph import Graph, ThetaKind, check_density
from ..noise import WongZakaiPath, sample_wiener

__all__ = ["Variant", "ControlProblem", "ControlSolution", "DEFAULT_SLOPE_FLOOR"]

DEFAULT_SLOPE_FLOOR = 1e-6


class Variant(enum.Enum):
    ADDITIVE = "additive"
    SPECIAL = "special"

    @classmethod
    def parse(cls, value) -> "Variant":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {"additive-wz": "additive", "additivewz": "additive", "special-multiplicative": "special",
                   "specialmultiplicative": "special", "multiplicative": "special"}
        key = aliases.get(key, key)
        for item in cls:
            if item.value == key:
                return item
        raise ValueError(f"unknown variant {value!r}")


@dataclass(frozen=True, eq=False)
class ControlProblem:
    graph: Graph
    rho_a: np.ndarray
    rho_b: np.ndarray
    M: int
    variant: Variant = Variant.ADDITIVE
    sigma: np.ndarray | None = None
    epsilon: float = 0.0
    noise: WongZakaiPath | None = None
    theta: ThetaKind = ThetaKind.ARITHMETIC
    slope_floor: float = DEFAULT_SLOPE_FLOOR
    slopes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        g = self.graph
        object.__setattr__(self, "variant", Variant.parse(self.variant))
        object.__setattr__(self, "theta", ThetaKind.parse(self.theta))
        object.__setattr__(self, "rho_a", check_density(self.rho_a, g.n))
        object.__setattr__(self, "rho_b", check_density(self.rho_b, g.n))
        if int(self.M) != self.M or self.M < 1:
            raise ValueError("M must be a positive integer")
        object.__setattr__(self, "M", int(self.M))
        sigma = np.zeros(g.n) if self.sigma is None else np.asarray(self.sigma, dtype=float).reshape(-1)
        if sigma.shape != (g.n,) or not np.all(np.isfinite(sigma)):
            raise ValueError(f"sigma must be a finite vector of length {g.n}")
        object.__setattr__(self, "sigma", sigma)
        if self.noise is not None:
            if self.noise.wiener.batched:
                raise ValueError("control problems take a single noise path")
            if abs(self.noise.T - 1.0) > 1e-12:
                raise ValueError("noise path must cover [0, 1]")
            t = np.arange(self.M + 1) / self.M
            slopes = np.diff(self.noise.value(t)) * self.M
        else:
            slopes = np.zeros(self.M)
        slopes.setflags(write=False)
        object.__setattr__(self, "slopes", slopes)

    @classmethod
    def with_noise(cls, graph, rho_a, rho_b, M, *, seed, delta, dt_w=None, **kw) -> "ControlProblem":
        """Build a problem whose noise is the Wong-Zakai path of ``seed`` with width ``delta``."""
        dt_w = delta if dt_w is None else dt_w
        wz = WongZakaiPath(sample_wiener(seed, 1.0, dt_w), delta)
        return cls(graph, rho_a, rho_b, M, noise=wz, **kw)

    @property
    def h(self) -> float:
        return 1.0 / self.M

    @property
    def n_interior(self) -> int:
        return (self.M - 1) * self.graph.n

    def reweighting(self) -> np.ndarray:
        """Per-interval factor ``1 + eps dW_k`` (ones for the additive variant)."""
        if self.variant is Variant.ADDITIVE:
            return np.ones(self.M)
        f = 1.0 + self.epsilon * self.slopes
        bad = np.flatnonzero(np.abs(f) < self.slope_floor)
        if bad.size:
            k = int(bad[0])
            raise DegenerateNoiseError(
                f"1 + eps*dW vanishes on interval {k} (value {f[k]:.3g}); resample the noise path", interval=k
            )
        return f

    def cost_weights(self) -> np.ndarray:
        """Per-interval weight ``c_k`` multiplying the kinetic cost in transformed flux variables."""
        return self.reweighting() ** -2.0

    def noise_potential(self) -> np.ndarray:
        """Potential whose gradient drives the noise flux in the (transformed) constraint."""
        if self.variant is Variant.SPECIAL:
            return np.zeros(self.graph.n)
        return self.sigma

    def replace(self, **changes) -> "ControlProblem":
        kw = dict(graph=self.graph, rho_a=self.rho_a, rho_b=self.rho_b, M=self.M, variant=self.variant,
                  sigma=self.sigma, epsilon=self.epsilon, noise=self.noise, theta=self.theta,
                  slope_floor=self.slope_floor)
        kw.update(changes)
        return ControlProblem(**kw)


@dataclass
class ControlSolution:
    """Solved path; ``S`` holds one multiplier vector per interval (``lambda = -S``)."""

    rho: np.ndarray
    m: np.ndarray
    S: np.ndarray
    action: float
    dual_value: float
    gap: float
    residual: float
    iterations: int
    S_start: np.ndarray | None = None
    S_end: np.ndarray | None = None
    converged: bool = True
    history: list = field(default_factory=list)

    @property
    def lam(self) -> np.ndarray:
        return -self.S

    def to_dict(self) -> dict:
        return {
            "action": self.action,
            "dual_value": self.dual_value,
            "gap": self.gap,
            "residual": self.residual,
            "iterations": self.iterations,
            "converged": self.converged,
            "rho": self.rho.tolist(),
            "m": self.m.tolist(),
            "S": self.S.tolist(),
        }

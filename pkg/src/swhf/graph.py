"""Weighted graphs and the discrete calculus on them.

Nodes are indexed ``0..N-1`` internally (graph files use 1-based indices).
Every edge is stored once as ``(i, j)`` with ``i < j``; an edge field is an
array with one entry per stored edge holding the value on the orientation
``i -> j``, the reverse orientation being its negation.

All node/edge operations broadcast over leading axes, so a batch of densities
of shape ``(..., N)`` can be pushed through in one call.
"""

from __future__ import annotations

import enum
import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    BoundaryDensityError,
    DensityError,
    DisconnectedGraphError,
    DuplicateEdgeError,
    GraphError,
    NonPositiveWeightError,
    SelfLoopError,
)

__all__ = [
    "Graph",
    "ThetaKind",
    "load_graph",
    "graph_from_dict",
    "path_graph",
    "cycle_graph",
    "complete_graph",
    "theta",
    "gradient",
    "divergence",
    "inner_product",
    "theta_connected_components",
    "check_density",
]

_DENSITY_TOL = 1e-12

# Gauss-Legendre rule on [0, 1] for the near-diagonal logarithmic mean.
_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)
_GL_U = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W
_LOGMEAN_QUAD_BAND = 1.0


class ThetaKind(enum.Enum):
    """Symmetric mean used as the density-dependent edge weight."""

    ARITHMETIC = "arithmetic"
    LOGARITHMIC = "logarithmic"

    @classmethod
    def parse(cls, value) -> "ThetaKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown theta kind {value!r}") from None

    def value_of(self, s, t):
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        if self is ThetaKind.ARITHMETIC:
            return 0.5 * (s + t)
        return _logmean(s, t)

    def partials(self, s, t):
        """First partial derivatives ``(dTheta/ds, dTheta/dt)`` on the open quadrant."""
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        if self is ThetaKind.ARITHMETIC:
            half = np.full(np.broadcast(s, t).shape, 0.5)
            return half, half.copy()
        return _logmean_partials(s, t)

    def second_partials(self, s, t):
        """Second partial derivatives ``(d2/ds2, d2/dsdt, d2/dt2)``."""
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        if self is ThetaKind.ARITHMETIC:
            zero = np.zeros(np.broadcast(s, t).shape)
            return zero, zero.copy(), zero.copy()
        return _logmean_second_partials(s, t)


def _logmean(s, t):
    s, t = np.broadcast_arrays(s, t)
    out = np.zeros(s.shape)
    pos = (s > 0) & (t > 0)
    # order the arguments so the result is exactly symmetric
    sp, tp = np.maximum(s[pos], t[pos]), np.minimum(s[pos], t[pos])
    with np.errstate(over="ignore"):
        x = sp / tp - 1.0
    small = np.abs(x) <= 1e-4
    far = x > 1.0
    mid = ~small & ~far
    vals = np.empty_like(x)
    xs = x[small]
    # x / log1p(x) = 1 + x/2 - x^2/12 + x^3/24 - 19 x^4/720 + ...
    vals[small] = tp[small] * (1.0 + xs * (0.5 + xs * (-1.0 / 12 + xs * (1.0 / 24 - xs * 19.0 / 720))))
    vals[mid] = tp[mid] * (x[mid] / np.log1p(x[mid]))
    # sp / tp may overflow for subnormal tp, so take logs separately
    vals[far] = (sp[far] - tp[far]) / (np.log(sp[far]) - np.log(tp[far]))
    out[pos] = vals
    return out if out.ndim else float(out)


def _logmean_partials(s, t):
    s, t = np.broadcast_arrays(s, t)
    z = np.asarray(np.log(s) - np.log(t))
    near = np.abs(z) < _LOGMEAN_QUAD_BAND
    ds = np.empty(s.shape)
    dt = np.empty(s.shape)
    if near.any():
        zn = z[near][..., None]
        u = _GL_U
        ds[near] = np.sum(_GL_W * u * np.exp((u - 1.0) * zn), axis=-1)
        dt[near] = np.sum(_GL_W * (1.0 - u) * np.exp(u * zn), axis=-1)
    far = ~near
    if far.any():
        d, sf, tf = z[far], s[far], t[far]
        ds[far] = (d - 1.0 + tf / sf) / d**2
        dt[far] = (-d - 1.0 + sf / tf) / d**2
    return ds, dt


def _logmean_second_partials(s, t):
    s, t = np.broadcast_arrays(s, t)
    z = np.asarray(np.log(s) - np.log(t))
    near = np.abs(z) < _LOGMEAN_QUAD_BAND
    dss = np.empty(s.shape)
    dst = np.empty(s.shape)
    dtt = np.empty(s.shape)
    if near.any():
        zn = z[near][..., None]
        u = _GL_U
        e_lo = np.exp((u - 1.0) * zn)
        e_hi = np.exp(u * zn)
        dss[near] = np.sum(_GL_W * u * (u - 1.0) * e_lo, axis=-1) / s[near]
        dst[near] = np.sum(_GL_W * u * (1.0 - u) * e_lo, axis=-1) / t[near]
        dtt[near] = -np.sum(_GL_W * u * (1.0 - u) * e_hi, axis=-1) / t[near]
    far = ~near
    if far.any():
        d, sf, tf = z[far], s[far], t[far]
        n = d - 1.0 + tf / sf
        dss[far] = (1.0 / sf - tf / sf**2) / d**2 - 2.0 * n / (d**3 * sf)
        dst[far] = (1.0 / sf - 1.0 / tf) / d**2 + 2.0 * n / (d**3 * tf)
        # mirror of dss with s <-> t, d -> -d
        n_t = -d - 1.0 + sf / tf
        dtt[far] = (1.0 / tf - sf / tf**2) / d**2 + 2.0 * n_t / (d**3 * tf)
    return dss, dst, dtt


def theta(kind, a, b):
    """Evaluate the mean ``Theta(a, b)`` of the given kind.

    The logarithmic mean is continuous at ``a == b`` (value ``a``) and
    vanishes when either argument is zero.
    """
    a_arr = np.asarray(a, dtype=float)
    b_arr = np.asarray(b, dtype=float)
    if np.any(a_arr < 0) or np.any(b_arr < 0):
        raise ValueError("theta is only defined for nonnegative arguments")
    return ThetaKind.parse(kind).value_of(a_arr, b_arr)


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected connected weighted graph without loops or multi-edges."""

    n: int
    edges: np.ndarray
    omega: np.ndarray
    omega_tilde: np.ndarray
    incidence: np.ndarray = field(init=False, repr=False)
    abs_incidence: np.ndarray = field(init=False, repr=False)
    tail_matrix: np.ndarray = field(init=False, repr=False)
    head_matrix: np.ndarray = field(init=False, repr=False)
    neighbors: tuple = field(init=False, repr=False)

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        omega = np.asarray(self.omega, dtype=float).reshape(-1)
        omega_t = np.asarray(self.omega_tilde, dtype=float).reshape(-1)
        if self.n < 1:
            raise GraphError("graph needs at least one node")
        if len(omega) != len(edges) or len(omega_t) != len(edges):
            raise GraphError("one weight per edge required")
        seen = set()
        for k, (i, j) in enumerate(edges):
            if i == j:
                raise SelfLoopError(f"self loop at node {i + 1}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise GraphError(f"edge ({i + 1}, {j + 1}) references a missing node")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise DuplicateEdgeError(f"duplicate edge {key[0] + 1}-{key[1] + 1}")
            seen.add(key)
            if not (omega[k] > 0 and omega_t[k] > 0) or not np.isfinite(omega[k] + omega_t[k]):
                raise NonPositiveWeightError(f"edge {key[0] + 1}-{key[1] + 1} has a nonpositive weight")
        # canonical orientation, sorted for a stable iteration order
        canon = np.sort(edges, axis=1)
        order = np.lexsort((canon[:, 1], canon[:, 0]))
        canon, omega, omega_t = canon[order], omega[order], omega_t[order]
        for name, arr in (("edges", canon), ("omega", omega), ("omega_tilde", omega_t)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

        nbrs = [[] for _ in range(self.n)]
        for i, j in canon:
            nbrs[i].append(int(j))
            nbrs[j].append(int(i))
        object.__setattr__(self, "neighbors", tuple(tuple(sorted(v)) for v in nbrs))
        if not _is_connected(self.n, self.neighbors):
            raise DisconnectedGraphError("graph is not connected")

        inc = np.zeros((len(canon), self.n))
        inc[np.arange(len(canon)), canon[:, 0]] = 1.0
        inc[np.arange(len(canon)), canon[:, 1]] = -1.0
        inc.setflags(write=False)
        ainc = np.abs(inc)
        ainc.setflags(write=False)
        object.__setattr__(self, "incidence", inc)
        object.__setattr__(self, "abs_incidence", ainc)
        tail = (ainc + inc) / 2.0
        head = (ainc - inc) / 2.0
        tail.setflags(write=False)
        head.setflags(write=False)
        object.__setattr__(self, "tail_matrix", tail)
        object.__setattr__(self, "head_matrix", head)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def tails(self) -> np.ndarray:
        return self.edges[:, 0]

    @property
    def heads(self) -> np.ndarray:
        return self.edges[:, 1]

    def diff(self, x):
        """``x_i - x_j`` on every stored edge, broadcasting over leading axes."""
        x = np.asarray(x, dtype=float)
        return x[..., self.edges[:, 0]] - x[..., self.edges[:, 1]]

    def scatter(self, q):
        """Net outflow: node ``i`` receives ``+q_e`` for edges ``(i, j)`` and ``-q_e`` for ``(j, i)``."""
        return np.asarray(q, dtype=float) @ self.incidence

    def scatter_abs(self, q):
        """Node ``i`` receives ``+q_e`` from every incident edge."""
        return np.asarray(q, dtype=float) @ self.abs_incidence

    def edge_theta(self, rho, kind=ThetaKind.ARITHMETIC):
        rho = np.asarray(rho, dtype=float)
        kind = ThetaKind.parse(kind)
        return kind.value_of(rho[..., self.edges[:, 0]], rho[..., self.edges[:, 1]])

    def to_dict(self) -> dict:
        return {
            "nodes": self.n,
            "edges": [
                [int(i) + 1, int(j) + 1, float(w), float(wt)]
                for (i, j), w, wt in zip(self.edges, self.omega, self.omega_tilde)
            ],
        }


def _is_connected(n, neighbors) -> bool:
    seen = [False] * n
    seen[0] = True
    queue = deque([0])
    while queue:
        v = queue.popleft()
        for w in neighbors[v]:
            if not seen[w]:
                seen[w] = True
                queue.append(w)
    return all(seen)


def graph_from_dict(doc) -> Graph:
    """Build a graph from ``{"nodes": N, "edges": [[i, j, w, w_tilde?], ...]}`` (1-based)."""
    try:
        n = int(doc["nodes"])
        raw = doc.get("edges", [])
    except (KeyError, TypeError, ValueError) as exc:
        raise GraphError(f"malformed graph document: {exc}") from None
    edges, omega, omega_t = [], [], []
    for item in raw:
        if len(item) not in (2, 3, 4):
            raise GraphError(f"edge entry {item!r} must be [i, j, omega?, omega_tilde?]")
        i, j = int(item[0]) - 1, int(item[1]) - 1
        w = float(item[2]) if len(item) > 2 else 1.0
        wt = float(item[3]) if len(item) > 3 else w
        edges.append((i, j))
        omega.append(w)
        omega_t.append(wt)
    return Graph(n, np.array(edges, dtype=np.int64).reshape(-1, 2), np.array(omega), np.array(omega_t))


def load_graph(source) -> Graph:
    """Load a graph from a JSON file path, a JSON string or an already-parsed dict."""
    if isinstance(source, dict):
        return graph_from_dict(source)
    if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
        with open(source, encoding="utf-8") as fh:
            return graph_from_dict(json.load(fh))
    return graph_from_dict(json.loads(source))


def path_graph(n, omega=1.0) -> Graph:
    edges = np.array([(i, i + 1) for i in range(n - 1)], dtype=np.int64).reshape(-1, 2)
    w = np.broadcast_to(np.asarray(omega, dtype=float), (len(edges),)).copy()
    return Graph(n, edges, w, w.copy())


def cycle_graph(n, omega=1.0) -> Graph:
    edges = np.array([(i, (i + 1) % n) for i in range(n)], dtype=np.int64)
    w = np.broadcast_to(np.asarray(omega, dtype=float), (len(edges),)).copy()
    return Graph(n, edges, w, w.copy())


def complete_graph(n, omega=1.0) -> Graph:
    edges = np.array([(i, j) for i in range(n) for j in range(i + 1, n)], dtype=np.int64).reshape(-1, 2)
    w = np.broadcast_to(np.asarray(omega, dtype=float), (len(edges),)).copy()
    return Graph(n, edges, w, w.copy())


def check_density(rho, n=None, *, interior=False, tol=_DENSITY_TOL) -> np.ndarray:
    """Validate a (batch of) density vectors and return them as a float array."""
    rho = np.asarray(rho, dtype=float)
    if n is not None and rho.shape[-1] != n:
        raise DensityError(f"density has {rho.shape[-1]} entries, graph has {n} nodes")
    if not np.all(np.isfinite(rho)):
        raise DensityError("density has non-finite entries")
    if np.any(rho < 0):
        raise DensityError("density has negative entries")
    if np.any(np.abs(rho.sum(axis=-1) - 1.0) > tol):
        raise DensityError("density does not sum to one")
    if interior and np.any(rho <= 0):
        raise BoundaryDensityError("density touches the simplex boundary")
    return rho


def gradient(g: Graph, S):
    """Graph gradient ``sqrt(omega_ij) (S_i - S_j)`` on each stored edge."""
    S = np.asarray(S, dtype=float)
    if not np.all(np.isfinite(S)):
        raise ValueError("potential has non-finite entries")
    return np.sqrt(g.omega) * g.diff(S)


def divergence(g: Graph, rho, f, kind=ThetaKind.ARITHMETIC):
    """Discrete divergence of the flux ``rho f``: ``-sum_l sqrt(omega_jl) f_jl theta_jl`` at node ``j``."""
    flux = np.sqrt(g.omega) * np.asarray(f, dtype=float) * g.edge_theta(rho, kind)
    return -g.scatter(flux)


def inner_product(g: Graph, rho, u, v, kind=ThetaKind.ARITHMETIC):
    """theta(rho)-weighted inner product of two edge fields.

    Equals one half of the sum over both orientations of every edge; the
    edge weight already sits inside the gradient, so it is not repeated here
    (this keeps ``divergence`` the negative adjoint of ``gradient``).
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return np.sum(u * v * g.edge_theta(rho, kind), axis=-1)


def theta_connected_components(g: Graph, rho, tol=0.0, kind=ThetaKind.ARITHMETIC):
    """Partition the nodes into maximal sets linked by edges with ``theta > tol``.

    Returns a list of sorted node-index tuples ordered by smallest member.
    """
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    th = g.edge_theta(rho, kind)
    parent = list(range(g.n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for (i, j), t in zip(g.edges, th):
        if t > tol:
            ri, rj = find(int(i)), find(int(j))
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)
    blocks = {}
    for v in range(g.n):
        blocks.setdefault(find(v), []).append(v)
    return sorted((tuple(b) for b in blocks.values()), key=lambda b: b[0])


def spanning_tree(g: Graph, root: int):
    """BFS tree toward ``root``: returns ``(order, parent)`` with ``order`` root-first."""
    parent = [-1] * g.n
    seen = [False] * g.n
    seen[root] = True
    order = [root]
    queue = deque([root])
    while queue:
        v = queue.popleft()
        for w in g.neighbors[v]:
            if not seen[w]:
                seen[w] = True
                parent[w] = v
                order.append(w)
                queue.append(w)
    return order, parent


def edge_index(g: Graph) -> dict:
    """Map ``(i, j)`` (either orientation) to ``(edge id, sign)``."""
    idx = {}
    for k, (i, j) in enumerate(g.edges):
        idx[(int(i), int(j))] = (k, 1.0)
        idx[(int(j), int(i))] = (k, -1.0)
    return idx

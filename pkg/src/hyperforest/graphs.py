"""Weighted graphs and the t-field's energies, operator and Green kernel.

Conventions
-----------
A configuration assigns a real number ``t_j`` to every vertex.  The
unnormalized log-density of the t-field measure at parameter ``a`` is

    log w(t) = -F(t) - M(t) + a * log det D(t)

with gradient energy ``F(t) = sum_(jk) J_jk (cosh(t_j - t_k) - 1)``,
pinning energy ``M(t) = sum_j eps_j (cosh t_j - 1)`` and ``D(t)`` the
symmetric matrix

    D_jk = -J_jk                                   (edge jk)
    D_jj = sum_k J_jk e^(t_k - t_j) + eps_j e^(-t_j).

``D`` factorizes as ``e^(-t) Delta e^(-t)`` where ``Delta`` is the graph
Laplacian with conductances ``J_jk e^(t_j + t_k)`` and killing terms
``eps_j e^(t_j)``, so ``det D = e^(-2 sum t) det Delta``.  ``D`` is
positive definite whenever every connected component carries at least one
strictly positive pinning.

Derived Green-kernel combinations, for ``G = D^(-1)`` and origin 0::

    G1_ij = G_ii + G_jj - 2 G_ij          (>= 0 for every real config)
    G2_ij = G1_ij * G_00 - (G_i0 - G_j0)^2   (>= 0 likewise)
    G3_ij = G_i0 - G_j0

Couplings and pinnings may be ints, Fractions or floats; the exact values
are preserved on the graph object (the fermionic/forest modules consume
them as rationals) while all t-field numerics run in double precision.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

# Configurations with entries beyond this range would overflow the
# e^(t_j + t_k) conductances; reject them instead of producing infs.
T_RANGE_LIMIT = 300.0


class NotPositiveDefinite(ArithmeticError):
    """D(t) failed its positive-definite factorization.

    Signals a violated precondition: an unpinned connected component, or a
    configuration extreme enough to overflow/underflow the factorization.
    """


class RangeError(ValueError):
    """A configuration entry exceeded the +-300 safety range."""


def _as_number(x):
    """Parse a JSON-borne coupling: number, or exact rational "p/q"."""
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, (int, Fraction, float)):
        return x
    raise TypeError(f"cannot interpret {x!r} as a coupling")


@dataclass(frozen=True)
class WeightedGraph:
    """Finite graph with nonnegative edge couplings and vertex pinnings.

    Parameters
    ----------
    n_vertices : int
        Vertices are 0 .. n_vertices-1.
    edges : sequence of (i, j, J)
        Couplings J >= 0; no self-loops, no duplicate edges.
    eps : sequence of per-vertex pinnings, or mapping {vertex: eps}
        Nonnegative.  Missing vertices default to 0.
    origin : int
        The distinguished vertex (default 0) entering G2/G3.
    """

    n_vertices: int
    edges: tuple = ()
    eps: tuple = ()
    origin: int = 0
    coords: tuple = field(default=None, compare=False)

    def __post_init__(self):
        n = self.n_vertices
        if n <= 0:
            raise ValueError("graph needs at least one vertex")
        edges = []
        seen = set()
        for (i, j, J) in self.edges:
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"edge ({i},{j}) out of range")
            if i == j:
                raise ValueError(f"self-loop at vertex {i}")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise ValueError(f"duplicate edge {key}")
            seen.add(key)
            if J < 0:
                raise ValueError(f"negative coupling on edge {key}")
            edges.append((key[0], key[1], J))
        object.__setattr__(self, "edges", tuple(edges))

        if isinstance(self.eps, dict):
            eps = [self.eps.get(v, 0) for v in range(n)]
        else:
            eps = list(self.eps) + [0] * (n - len(self.eps))
        if len(eps) != n:
            raise ValueError("pinning vector longer than vertex count")
        if any(e < 0 for e in eps):
            raise ValueError("negative pinning")
        object.__setattr__(self, "eps", tuple(eps))

        if not (0 <= self.origin < n):
            raise ValueError("origin out of range")
        if self.coords is not None:
            object.__setattr__(self, "coords", tuple(map(tuple, self.coords)))

    # -- structure ---------------------------------------------------------

    def neighbors(self):
        """Adjacency as a list of lists of (neighbor, J)."""
        adj = [[] for _ in range(self.n_vertices)]
        for (i, j, J) in self.edges:
            adj[i].append((j, J))
            adj[j].append((i, J))
        return adj

    def components(self):
        """Connected components as sorted tuples of vertices."""
        adj = self.neighbors()
        seen = [False] * self.n_vertices
        comps = []
        for start in range(self.n_vertices):
            if seen[start]:
                continue
            stack, comp = [start], []
            seen[start] = True
            while stack:
                v = stack.pop()
                comp.append(v)
                for (w, _) in adj[v]:
                    if not seen[w]:
                        seen[w] = True
                        stack.append(w)
            comps.append(tuple(sorted(comp)))
        return comps

    def is_connected(self):
        return len(self.components()) == 1

    def pinned_everywhere(self):
        """True iff every component carries some strictly positive pinning."""
        return all(any(self.eps[v] > 0 for v in comp) for comp in self.components())

    def edge_index(self, i, j):
        key = (min(i, j), max(i, j))
        for idx, (a, b, _) in enumerate(self.edges):
            if (a, b) == key:
                return idx
        raise KeyError(f"no edge {key}")

    def with_edge_coupling(self, edge, value):
        """Copy of the graph with one coupling replaced.

        ``edge`` is either an index into ``edges`` or a vertex pair.
        """
        idx = edge if isinstance(edge, int) else self.edge_index(*edge)
        if not (0 <= idx < len(self.edges)):
            raise IndexError(f"edge index {idx} out of range")
        if value < 0:
            raise ValueError("negative coupling")
        i, j, _ = self.edges[idx]
        new_edges = list(self.edges)
        new_edges[idx] = (i, j, value)
        return WeightedGraph(self.n_vertices, tuple(new_edges), self.eps,
                             self.origin, self.coords)

    def without_edge(self, edge):
        idx = edge if isinstance(edge, int) else self.edge_index(*edge)
        new_edges = list(self.edges)
        del new_edges[idx]
        return WeightedGraph(self.n_vertices, tuple(new_edges), self.eps,
                             self.origin, self.coords)

    # -- serialization -----------------------------------------------------

    @classmethod
    def from_json(cls, text):
        data = json.loads(text) if isinstance(text, (str, bytes)) else text
        edges = tuple((i, j, _as_number(J)) for (i, j, J) in data.get("edges", []))
        pinning = {int(v): _as_number(e) for (v, e) in data.get("pinning", [])}
        return cls(int(data["vertices"]), edges, pinning,
                   int(data.get("origin", 0)))

    @classmethod
    def from_json_file(cls, path):
        with open(path) as fh:
            return cls.from_json(fh.read())

    def to_json(self):
        def enc(x):
            return str(x) if isinstance(x, Fraction) else x

        return json.dumps({
            "vertices": self.n_vertices,
            "edges": [[i, j, enc(J)] for (i, j, J) in self.edges],
            "pinning": [[v, enc(e)] for v, e in enumerate(self.eps) if e != 0],
            "origin": self.origin,
        })


# -- constructors ------------------------------------------------------------

def complete_graph(n, J=1, eps=None):
    edges = tuple((i, j, J) for i in range(n) for j in range(i + 1, n))
    return WeightedGraph(n, edges, eps if eps is not None else {0: 1})


def path_graph(n, J=1, eps=None):
    edges = tuple((i, i + 1, J) for i in range(n - 1))
    return WeightedGraph(n, edges, eps if eps is not None else {0: 1})


def cycle_graph(n, J=1, eps=None):
    edges = tuple((i, (i + 1) % n, J) for i in range(n))
    return WeightedGraph(n, edges, eps if eps is not None else {0: 1})


def grid_box(L, beta, eps_origin=1):
    """L x L box of the square lattice with pinning at its center.

    Every nearest-neighbor coupling equals ``beta``.  The distinguished
    origin is the vertex at grid position (L//2, L//2) so that distances
    measured from it stay within the box on all sides.  Grid coordinates
    are stored on the graph for Euclidean-distance bookkeeping.
    """
    if L < 1:
        raise ValueError("box side must be >= 1")

    def vid(x, y):
        return x * L + y

    edges = []
    for x in range(L):
        for y in range(L):
            if x + 1 < L:
                edges.append((vid(x, y), vid(x + 1, y), beta))
            if y + 1 < L:
                edges.append((vid(x, y), vid(x, y + 1), beta))
    origin = vid(L // 2, L // 2)
    coords = tuple((x, y) for x in range(L) for y in range(L))
    return WeightedGraph(L * L, tuple(edges), {origin: eps_origin},
                         origin=origin, coords=coords)


def vertex_at(graph, x, y):
    """Look up a grid vertex by its stored coordinates."""
    if graph.coords is None:
        raise ValueError("graph carries no coordinates")
    return graph.coords.index((x, y))


def euclidean_distance(graph, v, w):
    """Euclidean distance between two vertices of a coordinate graph."""
    if graph.coords is None:
        raise ValueError("graph carries no coordinates")
    (x1, y1), (x2, y2) = graph.coords[v], graph.coords[w]
    return math.hypot(x1 - x2, y1 - y2)


# -- energies and the operator D ---------------------------------------------

def _check_config(graph, t):
    t = np.asarray(t, dtype=float)
    if t.shape != (graph.n_vertices,):
        raise ValueError(f"config has shape {t.shape}, want ({graph.n_vertices},)")
    if not np.all(np.isfinite(t)):
        raise RangeError("non-finite entry in configuration")
    if np.max(np.abs(t), initial=0.0) > T_RANGE_LIMIT:
        raise RangeError(f"|t| exceeds {T_RANGE_LIMIT}")
    return t


def energy_F(graph, t):
    """Gradient energy sum_(jk) J_jk (cosh(t_j - t_k) - 1)."""
    t = _check_config(graph, t)
    return math.fsum(float(J) * (math.cosh(t[i] - t[j]) - 1.0)
                     for (i, j, J) in graph.edges)


def energy_M(graph, t):
    """Pinning energy sum_j eps_j (cosh t_j - 1)."""
    t = _check_config(graph, t)
    return math.fsum(float(e) * (math.cosh(tj) - 1.0)
                     for e, tj in zip(graph.eps, t))


def assemble_D(graph, t):
    """The symmetric operator D(t) as a dense array."""
    t = _check_config(graph, t)
    n = graph.n_vertices
    D = np.zeros((n, n))
    for (i, j, J) in graph.edges:
        J = float(J)
        D[i, j] -= J
        D[j, i] -= J
        D[i, i] += J * math.exp(t[j] - t[i])
        D[j, j] += J * math.exp(t[i] - t[j])
    for v, e in enumerate(graph.eps):
        D[v, v] += float(e) * math.exp(-t[v])
    return D


def assemble_laplacian(graph, t):
    """The tilted Laplacian Delta(t): conductances J e^(t_i+t_j), killing eps e^(t)."""
    t = _check_config(graph, t)
    n = graph.n_vertices
    M = np.zeros((n, n))
    for (i, j, J) in graph.edges:
        c = float(J) * math.exp(t[i] + t[j])
        M[i, j] -= c
        M[j, i] -= c
        M[i, i] += c
        M[j, j] += c
    for v, e in enumerate(graph.eps):
        M[v, v] += float(e) * math.exp(t[v])
    return M


def _cholesky(mat, context):
    try:
        L = np.linalg.cholesky(mat)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"{context}: {exc}") from None
    if not np.all(np.isfinite(L)):
        raise NotPositiveDefinite(f"{context}: factor overflowed")
    return L

def log_det_D(graph, t):
    """log det D(t) via Cholesky; raises NotPositiveDefinite otherwise."""
    L = _cholesky(assemble_D(graph, t), "D(t)")
    return 2.0 * float(np.sum(np.log(np.diag(L))))


def log_density(graph, t, a):
    """Unnormalized log-density  -F - M + a log det D."""
    base = -energy_F(graph, t) - energy_M(graph, t)
    if a == 0:
        return base
    return base + a * log_det_D(graph, t)


def grad_log_density(graph, t, a):
    """Gradient of `log_density` in t.

    The determinant term uses  d/dt_j log det D = tr(G dD/dt_j)  where
    dD/dt_j is diagonal, supported on j and its neighbors.
    """
    t = _check_config(graph, t)
    n = graph.n_vertices
    g = np.zeros(n)
    for (i, j, J) in graph.edges:
        s = float(J) * math.sinh(t[i] - t[j])
        g[i] -= s
        g[j] += s
    for v, e in enumerate(graph.eps):
        g[v] -= float(e) * math.sinh(t[v])
    if a == 0:
        return g

    D = assemble_D(graph, t)
    L = _cholesky(D, "D(t)")
    G = np.linalg.inv(L.T) @ np.linalg.inv(L)
    for (i, j, J) in graph.edges:
        J = float(J)
        # d/dt_i of D_ii picks -J e^(t_j - t_i); of D_jj picks +J e^(t_i - t_j)
        g[i] += a * (-J * math.exp(t[j] - t[i]) * G[i, i]
                     + J * math.exp(t[i] - t[j]) * G[j, j])
        g[j] += a * (-J * math.exp(t[i] - t[j]) * G[j, j]
                     + J * math.exp(t[j] - t[i]) * G[i, i])
    for v, e in enumerate(graph.eps):
        g[v] -= a * float(e) * math.exp(-t[v]) * G[v, v]
    return g


# -- Green kernel -------------------------------------------------------------

@dataclass(frozen=True)
class GreenBundle:
    """G = D^(-1) plus the derived scalars for one vertex pair."""

    G: np.ndarray
    i: int
    j: int
    G1: float
    G2: float
    G3: float
    G00: float


def green_matrix(graph, t):
    """Full inverse G = D(t)^(-1)."""
    D = assemble_D(graph, t)
    L = _cholesky(D, "D(t)")
    Linv = np.linalg.inv(L)
    return Linv.T @ Linv


def green_bundle(graph, t, i, j):
    """Green kernel and the combinations G1, G2, G3 for the pair (i, j)."""
    G = green_matrix(graph, t)
    o = graph.origin
    G1 = G[i, i] + G[j, j] - 2.0 * G[i, j]
    G3 = G[i, o] - G[j, o]
    G00 = G[o, o]
    G2 = G1 * G00 - G3 * G3
    return GreenBundle(G=G, i=i, j=j, G1=G1, G2=G2, G3=G3, G00=G00)

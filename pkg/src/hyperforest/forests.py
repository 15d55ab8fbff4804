"""Exact spanning-forest sums: the combinatorial ground truth.

An unrooted spanning forest is an acyclic edge subset; every vertex
belongs to exactly one tree (isolated vertices are singleton trees).
The weight of a forest is

    W(F) = prod_(e in F) J_e  *  prod_(T in F) (1 + sum_(i in T) eps_i)

and `partition_forest` returns USF_CONSTANT * sum_F W(F).  The overall
constant is a convention knob: sum-over-forests representations of the
one-component fermionic partition function appear in the literature both
with and without a global factor 2, depending on how the site measure is
normalized.  For the site measure shipped here the calibration self-test
(`hyperforest.fermionic.calibrate`) fixes the constant to 1, which
direct numerical quadrature of the t-field integral confirms
independently; the module never bakes the factor into the weights
themselves.

Everything here is exact enumeration — no sampling, no floats (unless
the graph itself carries float couplings).  That exactness is the whole
point: this module is the independent oracle the symbolic fermionic
engine is checked against.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, permutations

from .graphs import WeightedGraph

FOREST_EDGE_LIMIT = 25

# Fixed by the calibration self-test; see module docstring.
USF_CONSTANT = Fraction(1)


class TooLarge(ValueError):
    """Graph has too many edges for exhaustive 2^|E| enumeration."""


class ZeroPartition(ZeroDivisionError):
    """A normalized quantity was requested but the partition sum is 0."""


@dataclass(frozen=True)
class SpanningForest:
    """An acyclic edge subset together with its tree partition."""

    edge_indices: tuple
    trees: tuple  # tuple of sorted vertex tuples, one per tree


class _UnionFind:
    __slots__ = ("parent",)

    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, x):
        p = self.parent
        while p[x] != x:
            p[x] = p[p[x]]
            x = p[x]
        return x

    def union(self, a, b):
        """Merge; returns False if a and b already share a component."""
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[rb] = ra
        return True


def enumerate_forests(graph):
    """Yield every spanning forest (acyclic edge subset) exactly once."""
    m = len(graph.edges)
    if m > FOREST_EDGE_LIMIT:
        raise TooLarge(f"{m} edges > {FOREST_EDGE_LIMIT}; enumeration is 2^|E|")
    n = graph.n_vertices
    for mask in range(1 << m):
        uf = _UnionFind(n)
        ok = True
        idxs = []
        for e in range(m):
            if mask >> e & 1:
                i, j, _ = graph.edges[e]
                if not uf.union(i, j):
                    ok = False
                    break
                idxs.append(e)
        if not ok:
            continue
        groups = {}
        for v in range(n):
            groups.setdefault(uf.find(v), []).append(v)
        trees = tuple(tuple(sorted(g)) for g in
                      sorted(groups.values(), key=lambda g: g[0]))
        yield SpanningForest(tuple(idxs), trees)


def forest_weight(forest, graph):
    """W(F): coupling product times the pinned-tree factors."""
    w = Fraction(1)
    for e in forest.edge_indices:
        w = w * graph.edges[e][2]
    for tree in forest.trees:
        w = w * (1 + sum(graph.eps[v] for v in tree))
    return w


def sum_forest_weights(graph):
    return sum(forest_weight(f, graph) for f in enumerate_forests(graph))


def partition_forest(graph, constant=None):
    """Convention constant times the total forest weight."""
    c = USF_CONSTANT if constant is None else constant
    return c * sum_forest_weights(graph)


def connection_probability(graph, l, k):
    """P(l and k lie in the same tree) under the W-weighted forest measure."""
    if l == k:
        return Fraction(1)
    total = Fraction(0)
    joined = Fraction(0)
    for f in enumerate_forests(graph):
        w = forest_weight(f, graph)
        total += w
        if any(l in tree and k in tree for tree in f.trees):
            joined += w
    if total == 0:
        raise ZeroPartition("total forest weight is zero")
    return joined / total


def forest_green(graph, l, k):
    """Exact Green-kernel expectation <G_lk> dual to the forest measure.

    The dictionary is the connection sum with one twist: the tree
    containing ``l`` (and ``k``, when they are joined) carries *no*
    ``(1 + sum eps)`` factor, every other tree keeps its usual weight.
    Equivalently E[ 1_{l~k} / (1 + eps-sum of the connecting tree) ]
    under the W-weighted forest measure.  The plain connection
    probability only matches this when the connecting tree carries zero
    pinning, so the two functions really are different observables.
    Validated against direct quadrature of the a = 3/2 t-field integral.
    """
    total = Fraction(0)
    joined = Fraction(0)
    for f in enumerate_forests(graph):
        w = forest_weight(f, graph)
        total += w
        tree_l = next(tree for tree in f.trees if l in tree)
        if k in tree_l:
            joined += w / (1 + sum(graph.eps[v] for v in tree_l))
    if total == 0:
        raise ZeroPartition("total forest weight is zero")
    return joined / total


def contracted(graph, edge):
    """Contract one edge; parallel couplings merge additively.

    Merging parallel edges by summing J preserves all forest sums (a
    forest uses at most one of the parallels), and the pinnings of the
    merged endpoints add so that tree factors are preserved too.
    """
    idx = edge if isinstance(edge, int) else graph.edge_index(*edge)
    i, j, _ = graph.edges[idx]  # i < j; j collapses into i

    def relabel(v):
        if v == j:
            return i
        return v - 1 if v > j else v

    acc = {}
    for (a, b, J) in graph.edges[:idx] + graph.edges[idx + 1:]:
        ra, rb = relabel(a), relabel(b)
        if ra == rb:
            continue  # would be a self-loop: cycle through the contraction
        key = (min(ra, rb), max(ra, rb))
        acc[key] = acc.get(key, 0) + J
    eps = list(graph.eps)
    eps[i] = eps[i] + eps[j]
    del eps[j]
    edges = tuple((a, b, J) for (a, b), J in sorted(acc.items()))
    return WeightedGraph(graph.n_vertices - 1, edges, eps,
                         origin=relabel(graph.origin))


def connected_graphs_up_to_iso(max_vertices):
    """All connected graphs with <= max_vertices vertices, one labeled
    representative per isomorphism class, as (n_vertices, edge_pairs).

    Counts per vertex number: 1, 1, 2, 6, 21 — so 31 classes through 5.
    """
    out = []
    for nv in range(1, max_vertices + 1):
        pairs = list(combinations(range(nv), 2))
        seen = set()
        for mask in range(1 << len(pairs)):
            edges = [pairs[e] for e in range(len(pairs)) if mask >> e & 1]
            uf = _UnionFind(nv)
            for (i, j) in edges:
                uf.union(i, j)
            if len({uf.find(v) for v in range(nv)}) != 1:
                continue
            canon = min(
                tuple(sorted((min(p[i], p[j]), max(p[i], p[j]))
                             for (i, j) in edges))
                for p in permutations(range(nv)))
            if canon in seen:
                continue
            seen.add(canon)
            out.append((nv, tuple(edges)))
    return out

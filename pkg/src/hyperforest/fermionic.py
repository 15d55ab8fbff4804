"""Fermionic dual at half-integer a: exact partition sums and moments.

At parameter ``a = n + 1/2`` the t-field measure has an exact dual: n
fermion flavours per vertex with radial composite
``sigma_i = sqrt(1 + 2 psibar_i . psi_i)`` and action

    S = sum_(ij) J_ij (sigma_i sigma_j - psibar_i.psi_j - psibar_j.psi_i - 1)
        + sum_i eps_i (sigma_i - 1).

The unnormalized state is ``<<F>> = integrate_all_sites(F e^(-S))`` with
the ``sigma^(-1)``-weighted site measure from :mod:`hyperforest.grassmann`,
and the partition function is ``Z = <<1>>``.

Two deliberately independent evaluation routes are kept side by side:

``method="generic"``
    Literal expansion in the Grassmann algebra.  Exponential in the
    number of generators, trusts nothing, used for expectations and as a
    cross-check of the fast route.

``method="det"``
    The partition function collapses to commuting coefficient algebra.
    Writing ``p_i = psibar_i . psi_i``, the bosonic prefactor
    ``prod_i sigma_i^(-1) e^(sum J(1 - sigma sigma') + sum eps(1 - sigma))``
    is a polynomial ``sum_k c_k p^k`` (each ``p_i`` is nilpotent of order
    n+1), while the quadratic part integrates to determinant
    polynomials.  Concretely

        Z = (-1)^(V n) * sum_k c_k (prod_i k_i!) [p^k] det(diag(p) + K)^n

    with ``K`` the symmetric coupling matrix (zero diagonal) and the
    coefficient extraction truncated at degree n per variable.  Exact
    over rationals, polynomial cost for fixed V.

Both routes agree on everything small enough to compare — that agreement
is part of the test suite, not an assumption.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .forests import ZeroPartition, sum_forest_weights
from .graphs import WeightedGraph
from .grassmann import (
    Algebra,
    BerezinConvention,
    DEFAULT_CONVENTION,
    CapExceeded,
    integrate_all_sites,
    nilpotent_exp,
    nilpotent_series,
)

# Keyspace guard for the det backend: (n+1)^V coefficient slots.
DET_KEYSPACE_LIMIT = 300_000


class DegreeCertificateFailed(AssertionError):
    """Interpolated polynomial failed its extra-node degree check."""


class IndexBudgetExceeded(ValueError):
    """A moment requested more flavour slots than the model has."""


class AssertionFailure(AssertionError):
    """A scanned inequality failed; message carries the reproduction seed."""


def _fr(x):
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    return Fraction(x)  # exact also for floats (binary rationals)


# ----------------------------------------------------------------------
# model and generic route
# ----------------------------------------------------------------------

class FermionicModel:
    """Graph + flavour count n, with the action built on demand.

    Parameters
    ----------
    graph : WeightedGraph
    n : int
        Number of fermion flavours; the dual t-field parameter is
        a = n + 1/2.
    """

    def __init__(self, graph, n):
        if n < 0:
            raise ValueError("flavour count must be >= 0")
        self.graph = graph
        self.n = n
        self.algebra = Algebra(graph.n_vertices, n)
        self._action = None
        self._exp_minus_action = None

    @property
    def action(self):
        if self._action is None:
            alg = self.algebra
            s = alg.zero()
            for (i, j, J) in self.graph.edges:
                s = s + _fr(J) * (alg.sigma(i) * alg.sigma(j)
                                  - alg.pair_product(i, j)
                                  - alg.pair_product(j, i)
                                  - alg.one())
            for v, eps in enumerate(self.graph.eps):
                if eps != 0:
                    s = s + _fr(eps) * (alg.sigma(v) - alg.one())
            self._action = s
        return self._action

    @property
    def exp_minus_action(self):
        if self._exp_minus_action is None:
            self._exp_minus_action = nilpotent_exp(-self.action)
        return self._exp_minus_action

    def __repr__(self):
        return (f"FermionicModel(V={self.graph.n_vertices}, "
                f"|E|={len(self.graph.edges)}, n={self.n})")


def build_action(graph, n):
    """Construct the dual model; raises CapExceeded if 2*V*n > generator cap."""
    return FermionicModel(graph, n)


def unnormalized_state(model, obs=None, convention=None):
    """<<obs>> = integral of obs * e^(-S) under the site measure."""
    x = model.exp_minus_action
    if obs is not None:
        x = obs * x
    return integrate_all_sites(x, convention)


def partition_fermionic(graph, n, method="auto", convention=None):
    """Exact partition function Z of the n-flavour dual on ``graph``.

    Parameters
    ----------
    graph : WeightedGraph or FermionicModel
    n : int, ignored when a model is passed
    method : "auto" | "det" | "generic"
        "det" is the fast coefficient backend (default-convention only);
        "generic" expands the Grassmann algebra literally.
    convention : BerezinConvention, optional
        Only meaningful for the generic route.

    Returns
    -------
    Fraction (exact for rational couplings).
    """
    model = None
    if isinstance(graph, FermionicModel):
        model, graph, n = graph, graph.graph, graph.n
    if method == "auto":
        method = "generic" if (convention is not None
                               and convention != DEFAULT_CONVENTION) else "det"
    if method == "det":
        if convention is not None and convention != DEFAULT_CONVENTION:
            raise ValueError("det backend is calibrated to the default "
                             "convention; use method='generic'")
        return _partition_det(graph, n)
    if method == "generic":
        if model is None:
            model = FermionicModel(graph, n)
        return unnormalized_state(model, None, convention)
    raise ValueError(f"unknown method {method!r}")


def expectation_fermionic(model, obs):
    """<obs> = <<obs>> / Z, generic route for numerator and denominator."""
    z = unnormalized_state(model)
    if z == 0:
        raise ZeroPartition("fermionic partition function is zero")
    return unnormalized_state(model, obs) / z


# ----------------------------------------------------------------------
# observables
# ----------------------------------------------------------------------

def tau(algebra, i, j, component):
    """tau_ij^l = -(psibar_i^l - psibar_j^l)(psi_i^l - psi_j^l)."""
    db = algebra.psibar(i, component) - algebra.psibar(j, component)
    dp = algebra.psi(i, component) - algebra.psi(j, component)
    return -(db * dp)


def eta(algebra, i, j, component, origin=0):
    """eta_ij^l = -(psibar_i^l - psibar_j^l) psi_origin^l."""
    db = algebra.psibar(i, component) - algebra.psibar(j, component)
    return -(db * algebra.psi(origin, component))


def u_pair(algebra, i, j):
    """u_ij = 1 - sigma_i sigma_j + psibar_i.psi_j + psibar_j.psi_i.

    This is the J_ij-derivative of -S; it is even, nilpotent of order
    n+1, and equals -(n_i - n_j, n_i - n_j)/2 in the spin form.
    """
    return (algebra.one() - algebra.sigma(i) * algebra.sigma(j)
            + algebra.pair_product(i, j) + algebra.pair_product(j, i))


def partial_sigma(algebra, vertex, j):
    """sqrt(1 + 2 sum_{l<=j} psibar_v^l psi_v^l): sigma cut at flavour j.

    For j = n this is plain sigma_v; for j = 0 it is 1.
    """
    if not 0 <= j <= algebra.n:
        raise ValueError(f"flavour cutoff must lie in 0..{algebra.n}, got {j}")
    x = algebra.one()
    for l in range(1, j + 1):
        x = x + 2 * (algebra.psibar(vertex, l) * algebra.psi(vertex, l))
    return nilpotent_series(x, Fraction(1, 2))


def defect_factor(model, j):
    """phi(j) = sigma_0(j) - eps_0 pi_0^j at the pinned origin.

    The factor produced when flavour j of the origin is integrated out
    in the moment recursions; products of these tie the fermionic state
    to the operator polynomials P_{L,m}.
    """
    o = model.graph.origin
    eps0 = Fraction(model.graph.eps[o])
    return partial_sigma(model.algebra, o, j) - eps0 * model.algebra.pi(o, j)


def dual_moment(model, i, j, n_tau, n_m, pi_components=()):
    """Mixed flavour moment < prod_l tau_ij^l * prod_(l in A) pi_o^l * prod_m eta_ij^m >.

    Flavours 1..n_tau carry tau factors, flavours n_tau+1..n_tau+n_m are
    the reserved block (pi factors at the origin may sit anywhere in
    1..n_tau+n_m, listed in ``pi_components``), and every remaining
    flavour n_tau+n_m+1..n carries an eta factor.

    Raises
    ------
    IndexBudgetExceeded
        if n_tau + n_m > n.
    ValueError
        for malformed pi_components or i == j.
    """
    n = model.n
    if n_tau < 0 or n_m < 0 or n_tau + n_m > n:
        raise IndexBudgetExceeded(
            f"n_tau + n_m = {n_tau + n_m} exceeds flavour count {n}")
    if i == j:
        raise ValueError("tau/eta observables need distinct vertices")
    a_set = tuple(pi_components)
    if len(set(a_set)) != len(a_set):
        raise ValueError("pi_components must be distinct")
    if any(not (1 <= l <= n_tau + n_m) for l in a_set):
        raise ValueError("pi_components must lie in 1..n_tau+n_m")
    alg = model.algebra
    origin = model.graph.origin
    obs = alg.one()
    for l in range(1, n_tau + 1):
        obs = obs * tau(alg, i, j, l)
    for l in a_set:
        obs = obs * alg.pi(origin, l)
    for l in range(n_tau + n_m + 1, n + 1):
        obs = obs * eta(alg, i, j, l, origin)
    return expectation_fermionic(model, obs)


def green_monomial_exponents(n, n_tau, n_m, pi_components=()):
    """Exponents of the Green-kernel monomial dual to :func:`dual_moment`.

    Returns {"G1": e1, "G2": e2, "G00": e0, "G3": e3} such that the
    fermionic moment equals < G1^e1 G2^e2 G00^e0 G3^e3 > under the
    t-field measure at a = n + 1/2 (same (i, j) pair, same origin).
    """
    if n_tau + n_m > n:
        raise IndexBudgetExceeded(
            f"n_tau + n_m = {n_tau + n_m} exceeds flavour count {n}")
    a_loc = sum(1 for l in pi_components if l <= n_tau)
    b_loc = len(tuple(pi_components))
    return {"G1": n_tau - a_loc, "G2": a_loc,
            "G00": b_loc - a_loc, "G3": n - (n_tau + n_m)}


# ----------------------------------------------------------------------
# det backend: truncated multivariate polynomials over Fraction
# ----------------------------------------------------------------------

def _one_poly(V):
    return {(0,) * V: Fraction(1)}


def _padd(a, b):
    out = dict(a)
    for k, c in b.items():
        s = out.get(k, 0) + c
        if s:
            out[k] = s
        elif k in out:
            del out[k]
    return out


def _pscale(a, c):
    if c == 0:
        return {}
    return {k: v * c for k, v in a.items()}


def _pmul(a, b, caps):
    out = {}
    for k1, c1 in a.items():
        for k2, c2 in b.items():
            k = tuple(x + y for x, y in zip(k1, k2))
            if any(x > cap for x, cap in zip(k, caps)):
                continue
            s = out.get(k, 0) + c1 * c2
            if s:
                out[k] = s
            elif k in out:
                del out[k]
    return out


def _half_power(V, v, cap, half):
    """(1 + 2 p_v)^half as a truncated single-variable polynomial."""
    out = {}
    coeff = Fraction(1)
    for k in range(cap + 1):
        if coeff:
            key = tuple(k if i == v else 0 for i in range(V))
            out[key] = coeff * 2 ** k
        coeff = coeff * (half - k) / (k + 1)
    return out


def _exp_poly(arg, scale, caps):
    """exp(scale * arg) for a polynomial with zero constant term."""
    scale = _fr(scale)
    out = _one_poly(len(caps))
    if scale == 0 or not arg:
        return out
    power = _one_poly(len(caps))
    k = 0
    fac = Fraction(1)
    while True:
        k += 1
        power = _pmul(power, arg, caps)
        if not power:
            return out
        fac = fac * k
        out = _padd(out, _pscale(power, scale ** k / fac))


def _det_fraction(M):
    """Exact determinant by fraction pivoting (small matrices)."""
    M = [row[:] for row in M]
    m = len(M)
    det = Fraction(1)
    for col in range(m):
        piv = next((r for r in range(col, m) if M[r][col] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != col:
            M[col], M[piv] = M[piv], M[col]
            det = -det
        det = det * M[col][col]
        inv = Fraction(1) / M[col][col]
        for r in range(col + 1, m):
            if M[r][col] != 0:
                f = M[r][col] * inv
                for c in range(col, m):
                    M[r][c] = M[r][c] - f * M[col][c]
    return det


def _det_poly(K, V):
    """det(diag(p) + K) expanded multilinearly in the p variables."""
    out = {}
    for mask in range(1 << V):
        comp = [i for i in range(V) if not mask >> i & 1]
        d = _det_fraction([[K[r][c] for c in comp] for r in comp])
        if d:
            out[tuple(1 if mask >> i & 1 else 0 for i in range(V))] = d
    return out


def _coupling_matrix(graph, skip_edge=None):
    V = graph.n_vertices
    K = [[Fraction(0)] * V for _ in range(V)]
    for idx, (i, j, J) in enumerate(graph.edges):
        if idx == skip_edge:
            continue
        K[i][j] = K[j][i] = _fr(J)
    return K


def _assemble(H, detn, V, n):
    total = Fraction(0)
    for k, m in detn.items():
        c = H.get(k)
        if c:
            f = 1
            for d in k:
                f *= math.factorial(d)
            total += c * f * m
    return -total if (V * n) % 2 else total


class _EdgeEvaluator:
    """Z as a function of one edge coupling, everything else precomputed."""

    def __init__(self, graph, n, edge_index):
        V = graph.n_vertices
        if (n + 1) ** V > DET_KEYSPACE_LIMIT:
            raise CapExceeded(f"(n+1)^V = {(n + 1) ** V} coefficient slots")
        self.V, self.n = V, n
        self.caps = (n,) * V
        self.edge_index = edge_index

        h = _one_poly(V)
        sqrt = [_half_power(V, v, n, Fraction(1, 2)) for v in range(V)]
        for v in range(V):
            h = _pmul(h, _half_power(V, v, n, Fraction(-1, 2)), self.caps)
            if graph.eps[v] != 0:
                arg = _padd(_one_poly(V), _pscale(sqrt[v], -1))
                h = _pmul(h, _exp_poly(arg, graph.eps[v], self.caps), self.caps)
        for idx, (i, j, J) in enumerate(graph.edges):
            arg = _padd(_one_poly(V),
                        _pscale(_pmul(sqrt[i], sqrt[j], self.caps), -1))
            if idx == edge_index:
                self.edge_arg = arg
                continue
            h = _pmul(h, _exp_poly(arg, J, self.caps), self.caps)
        self.h_rest = h
        self.K_rest = _coupling_matrix(graph, skip_edge=edge_index)
        if edge_index is not None:
            i, j, _ = graph.edges[edge_index]
            self.ij = (i, j)

    def __call__(self, coupling=None):
        h, K = self.h_rest, self.K_rest
        if self.edge_index is not None:
            Jf = _fr(coupling)
            h = _pmul(h, _exp_poly(self.edge_arg, Jf, self.caps), self.caps)
            i, j = self.ij
            K = [row[:] for row in K]
            K[i][j] = K[j][i] = Jf
        detn = _one_poly(self.V)
        dpoly = _det_poly(K, self.V)
        for _ in range(self.n):
            detn = _pmul(detn, dpoly, self.caps)
        return _assemble(h, detn, self.V, self.n)


def _partition_det(graph, n):
    return _EdgeEvaluator(graph, n, None)()


# ----------------------------------------------------------------------
# polynomial structure in a single coupling
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class RationalPolynomial:
    """Dense univariate polynomial with Fraction coefficients (ascending)."""

    coeffs: tuple

    def __post_init__(self):
        c = tuple(_fr(x) for x in self.coeffs)
        while len(c) > 1 and c[-1] == 0:
            c = c[:-1]
        object.__setattr__(self, "coeffs", c or (Fraction(0),))

    @property
    def degree(self):
        return len(self.coeffs) - 1

    def __call__(self, x):
        acc = Fraction(0)
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc

    def derivative(self, order=1):
        c = self.coeffs
        for _ in range(order):
            c = tuple(k * c[k] for k in range(1, len(c)))
        return RationalPolynomial(c or (Fraction(0),))


def _interpolate(xs, ys):
    """Exact Lagrange interpolation, returned as monomial coefficients."""
    m = len(xs)
    coef = list(ys)
    for j in range(1, m):
        for i in range(m - 1, j - 1, -1):
            coef[i] = (coef[i] - coef[i - 1]) / (xs[i] - xs[i - j])
    poly = [Fraction(0)] * m
    basis = [Fraction(1)]
    for k in range(m):
        for d, c in enumerate(basis):
            poly[d] += coef[k] * c
        nxt = [Fraction(0)] * (len(basis) + 1)
        for d, c in enumerate(basis):
            nxt[d] -= c * xs[k]
            nxt[d + 1] += c
        basis = nxt
    return tuple(poly)


def z_polynomial_in_edge(graph, n, edge):
    """Z as an exact polynomial in one edge's coupling, degree-certified.

    Z is interpolated through couplings 0..n (a degree-n polynomial is
    the structural claim) and then re-evaluated at n+1; any mismatch
    raises DegreeCertificateFailed rather than returning a wrong fit.
    """
    idx = edge if isinstance(edge, int) else graph.edge_index(*edge)
    ev = _EdgeEvaluator(graph, n, idx)
    xs = [Fraction(k) for k in range(n + 1)]
    ys = [ev(x) for x in xs]
    poly = RationalPolynomial(_interpolate(xs, ys))
    probe = Fraction(n + 1)
    if poly(probe) != ev(probe):
        raise DegreeCertificateFailed(
            f"Z on edge {graph.edges[idx][:2]} is not degree <= {n}: "
            f"interpolant gives {poly(probe)} at {probe}, direct gives "
            f"{ev(probe)}")
    return poly


# ----------------------------------------------------------------------
# positivity scans
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ScanRow:
    """One (trial, edge) record from a positivity scan."""

    graph: str
    n: int
    edge: tuple
    policy: str
    seed: int
    trial: int
    coupling: Fraction
    coeffs: tuple
    derivs_at_draw: tuple
    asserted: tuple
    verdict: str


def _asserted_orders(n, policy):
    if policy == "single":
        return tuple(range(n + 1)), False  # >= 0 for every order
    if policy == "two_point":
        ks = sorted({0, n, *range(1, math.ceil(n / 2) + 1)})
        return tuple(ks), True  # strict > 0 on these orders
    raise ValueError(f"unknown policy {policy!r}")


def positivity_scan(graph, n, policy, trials=20, seed=0, name="graph"):
    """Randomize couplings/pinnings and check derivative sign patterns.

    For every trial the scan redraws all edge couplings (positive
    rationals) and a pinning of the requested shape, interpolates Z in
    each edge coupling separately, and checks the k-th derivatives at
    the drawn coupling and at 0:

    * policy "single": one pinned vertex with 0 <= eps <= 1; every
      derivative order 0..n must be >= 0.
    * policy "two_point": two pinned vertices with arbitrary positive
      eps; orders k <= ceil(n/2) and k = n (and Z itself) must be > 0.
      Orders strictly between are recorded but never asserted.

    Returns the full list of ScanRow records; raises AssertionFailure
    (message includes seed and trial) on the first violation.
    """
    rng = np.random.default_rng(seed)
    V = graph.n_vertices
    ks, strict = _asserted_orders(n, policy)
    rows = []
    for trial in range(trials):
        couplings = [Fraction(int(rng.integers(1, 13)), int(rng.integers(1, 13)))
                     for _ in graph.edges]
        eps = [Fraction(0)] * V
        if policy == "single":
            v = int(rng.integers(0, V))
            eps[v] = Fraction(int(rng.integers(0, 5)), 4)
        else:
            v1, v2 = rng.choice(V, size=2, replace=False)
            eps[int(v1)] = Fraction(int(rng.integers(1, 13)),
                                    int(rng.integers(1, 13)))
            eps[int(v2)] = Fraction(int(rng.integers(1, 13)),
                                    int(rng.integers(1, 13)))
        g = WeightedGraph(V, [(i, j, c) for (i, j, _), c
                              in zip(graph.edges, couplings)], eps,
                          origin=graph.origin)
        for idx, (i, j, J) in enumerate(g.edges):
            poly = z_polynomial_in_edge(g, n, idx)
            derivs = tuple(poly.derivative(k)(J) for k in range(n + 1))
            at_zero = tuple(poly.derivative(k)(Fraction(0))
                            for k in range(n + 1))
            verdict = "ok"
            for k in ks:
                for where, val in (("J", derivs[k]), ("0", at_zero[k])):
                    bad = (val <= 0) if strict else (val < 0)
                    if bad:
                        verdict = "violated"
                        rows.append(ScanRow(name, n, (i, j), policy, seed,
                                            trial, J, tuple(poly.coeffs),
                                            derivs, ks, verdict))
                        raise AssertionFailure(
                            f"{name}: d^{k}Z/dJ^{k} at {where} is {val} "
                            f"(policy {policy}, n={n}); reproduce with "
                            f"seed={seed}, trial={trial}, edge=({i},{j})")
            rows.append(ScanRow(name, n, (i, j), policy, seed, trial, J,
                                tuple(poly.coeffs), derivs, ks, verdict))
    return rows


def scan_rows_to_csv(rows):
    """Render ScanRows as CSV text, one line per coefficient order."""
    header = ("graph,n,edge_i,edge_j,policy,seed,trial,order,"
              "coeff,coeff_float,deriv_at_draw,deriv_float,asserted,verdict")
    lines = [header]
    for r in rows:
        for k in range(len(r.coeffs)):
            coeff = r.coeffs[k]
            deriv = r.derivs_at_draw[k] if k < len(r.derivs_at_draw) else ""
            lines.append(
                f"{r.graph},{r.n},{r.edge[0]},{r.edge[1]},{r.policy},"
                f"{r.seed},{r.trial},{k},{coeff},{float(coeff):.17g},"
                f"{deriv},{float(deriv):.17g},{int(k in r.asserted)},"
                f"{r.verdict}")
    return "\n".join(lines) + "\n"


# ----------------------------------------------------------------------
# orientation calibration
# ----------------------------------------------------------------------

def calibrate():
    """One-time orientation self-test against the forest oracle.

    Tries all four Berezin conventions (pair order x global sign) on
    three n=1 probe graphs and keeps those whose partition function is
    a *consistent positive* multiple of the spanning-forest sum.

    Returns
    -------
    (convention, constant, table)
        The unique surviving convention, the constant (the forest-sum
        prefactor; 1 for the shipped measure), and the full ratio table
        for all four candidates.

    Raises
    ------
    AssertionFailure
        if zero or several conventions survive.
    """
    probes = [
        WeightedGraph(1, [], [Fraction(2, 3)]),
        WeightedGraph(2, [(0, 1, Fraction(3, 5))], [Fraction(4, 7), 0]),
        WeightedGraph(3, [(0, 1, Fraction(1, 2)), (1, 2, Fraction(1, 3))],
                      [Fraction(1, 5), 0, 0]),
    ]
    table = {}
    winners = []
    for psi_first in (True, False):
        for sign in (1, -1):
            conv = BerezinConvention(psi_first=psi_first, global_sign=sign)
            ratios = tuple(
                partition_fermionic(g, 1, method="generic", convention=conv)
                / sum_forest_weights(g)
                for g in probes)
            table[(psi_first, sign)] = ratios
            if len(set(ratios)) == 1 and ratios[0] > 0:
                winners.append((conv, ratios[0]))
    if len(winners) != 1:
        raise AssertionFailure(
            f"calibration isolated {len(winners)} conventions, not 1: {table}")
    conv, const = winners[0]
    return conv, const, table

import random
from fractions import Fraction as F

import pytest

import hyperforest.fermionic as fermionic
from hyperforest.fermionic import (
    AssertionFailure,
    DegreeCertificateFailed,
    IndexBudgetExceeded,
    RationalPolynomial,
    ScanRow,
    build_action,
    calibrate,
    dual_moment,
    eta,
    expectation_fermionic,
    green_monomial_exponents,
    partition_fermionic,
    positivity_scan,
    scan_rows_to_csv,
    tau,
    u_pair,
    unnormalized_state,
    z_polynomial_in_edge,
)
from hyperforest.forests import USF_CONSTANT, ZeroPartition, sum_forest_weights
from hyperforest.graphs import WeightedGraph, complete_graph, path_graph
from hyperforest.grassmann import (
    BerezinConvention,
    CapExceeded,
    apply_Q,
    left_derivative,
    nilpotent_exp,
    nilpotent_series,
)


def rand_rational_graph(rng, max_v=4):
    nv = rng.randrange(2, max_v + 1)
    edges = []
    for j in range(1, nv):
        i = rng.randrange(0, j)
        edges.append((i, j, F(rng.randrange(1, 10), rng.randrange(1, 10))))
    present = {(i, j) for (i, j, _) in edges}
    for i in range(nv):
        for j in range(i + 1, nv):
            if (i, j) not in present and rng.random() < 0.3:
                edges.append((i, j, F(rng.randrange(1, 10), rng.randrange(1, 10))))
    eps = [F(0)] * nv
    eps[rng.randrange(0, nv)] = F(rng.randrange(1, 10), rng.randrange(1, 10))
    return WeightedGraph(nv, edges, eps)


# -- calibration ------------------------------------------------------------

def test_calibration_unique_convention():
    conv, const, table = calibrate()
    assert conv == BerezinConvention(psi_first=True, global_sign=1)
    # the forest-sum prefactor for the shipped site measure is exactly 1
    # (statements of the duality normalized differently carry a global 2;
    # direct quadrature of the t-field integral confirms 1 for ours)
    assert const == F(1)
    assert const == USF_CONSTANT
    assert len(table) == 4
    # the rejected conventions are rejected for a reason: either an
    # inconsistent or a negative ratio
    for key, ratios in table.items():
        if key != (True, 1):
            assert len(set(ratios)) > 1 or ratios[0] <= 0


# -- partition function hand values ----------------------------------------

def test_single_vertex_n1():
    e = F(2, 3)
    g = WeightedGraph(1, [], [e])
    assert partition_fermionic(g, 1) == 1 + e
    assert partition_fermionic(g, 1, method="generic") == 1 + e


def test_single_vertex_n2():
    e = F(2, 3)
    g = WeightedGraph(1, [], [e])
    assert partition_fermionic(g, 2) == e**2 + 3 * e + 3


def test_two_vertex_n1_factorizes():
    J, e0 = F(3, 5), F(4, 7)
    g = WeightedGraph(2, [(0, 1, J)], [e0, 0])
    assert partition_fermionic(g, 1) == (1 + e0) * (1 + J)


def test_partition_n0_is_one():
    rng = random.Random(11)
    for _ in range(6):
        g = rand_rational_graph(rng)
        assert partition_fermionic(g, 0) == 1
        assert partition_fermionic(g, 0, method="generic") == 1


def test_det_equals_generic():
    rng = random.Random(5)
    for _ in range(5):
        g = rand_rational_graph(rng, max_v=3)
        for n in (1, 2):
            zd = partition_fermionic(g, n, method="det")
            zg = partition_fermionic(g, n, method="generic")
            assert zd == zg


def test_det_method_rejects_other_conventions():
    g = complete_graph(2)
    with pytest.raises(ValueError):
        partition_fermionic(g, 1, method="det",
                            convention=BerezinConvention(False, 1))
    # auto silently reroutes to generic instead
    z = partition_fermionic(g, 1, method="auto",
                            convention=BerezinConvention(True, -1))
    assert z == -partition_fermionic(g, 1)


def test_n1_matches_forest_sum():
    rng = random.Random(23)
    for _ in range(8):
        g = rand_rational_graph(rng)
        assert partition_fermionic(g, 1) == sum_forest_weights(g)


def test_partition_positive():
    rng = random.Random(42)
    for _ in range(5):
        g = rand_rational_graph(rng, max_v=3)
        for n in (0, 1, 2, 3):
            assert partition_fermionic(g, n) > 0


def test_edge_at_zero_equals_deletion():
    g = complete_graph(3, J=F(1, 2), eps={0: F(1, 3)})
    for n in (1, 2):
        z_del = partition_fermionic(g.without_edge(0), n)
        z0 = z_polynomial_in_edge(g, n, 0)(F(0))
        assert z0 == z_del


def test_multiplicative_over_components():
    # vertices {0,1} form a pinned edge, vertex 2 floats alone (pinned)
    e0, e2, J = F(1, 3), F(2, 5), F(3, 7)
    g = WeightedGraph(3, [(0, 1, J)], [e0, 0, e2])
    za = WeightedGraph(2, [(0, 1, J)], [e0, 0])
    zb = WeightedGraph(1, [], [e2])
    for n in (1, 2):
        assert partition_fermionic(g, n) == \
            partition_fermionic(za, n) * partition_fermionic(zb, n)


def test_det_keyspace_guard():
    g = path_graph(14, J=F(1, 2))
    with pytest.raises(CapExceeded):
        partition_fermionic(g, 2, method="det")


def test_build_action_generator_cap():
    g = path_graph(33)
    with pytest.raises(CapExceeded):
        build_action(g, 2)


# -- polynomial structure ----------------------------------------------------

def test_z_polynomial_degree_bound():
    g = complete_graph(3, J=F(1, 2), eps={0: F(1, 4)})
    for n in (0, 1, 2, 3):
        for idx in range(len(g.edges)):
            p = z_polynomial_in_edge(g, n, idx)
            assert p.degree <= n


def test_z_polynomial_matches_direct_evaluation():
    g = path_graph(3, J=F(2, 3), eps={0: F(1, 5)})
    p = z_polynomial_in_edge(g, 2, (0, 1))
    for val in (F(0), F(2, 3), F(7, 2)):
        assert p(val) == partition_fermionic(
            g.with_edge_coupling(0, val), 2)


def test_degree_certificate_failure(monkeypatch):
    class Cheat:
        def __init__(self, graph, n, edge_index):
            self.n = n

        def __call__(self, x):
            return x ** (self.n + 1)  # genuinely degree n+1

    monkeypatch.setattr(fermionic, "_EdgeEvaluator", Cheat)
    g = complete_graph(2)
    with pytest.raises(DegreeCertificateFailed):
        z_polynomial_in_edge(g, 1, 0)


def test_rational_polynomial_basics():
    p = RationalPolynomial((F(1), F(-2), F(3)))
    assert p.degree == 2
    assert p(F(2)) == 1 - 4 + 12
    assert p.derivative().coeffs == (F(-2), F(6))
    assert p.derivative(2).coeffs == (F(6),)
    assert p.derivative(3).coeffs == (F(0),)
    # trailing zeros are stripped
    assert RationalPolynomial((F(1), F(0))).degree == 0


def test_u_moments_are_z_derivatives():
    J = F(1, 2)
    g = WeightedGraph(3, [(0, 1, J), (1, 2, F(1, 3))], [F(1, 5), 0, 0])
    n = 2
    m = build_action(g, n)
    u = u_pair(m.algebra, 0, 1)
    p = z_polynomial_in_edge(g, n, 0)
    obs = m.algebra.one()
    for k in range(n + 2):
        assert unnormalized_state(m, obs) == p.derivative(k)(J)
        obs = obs * u
    # the loop's last comparison was k = n+1: both sides vanish
    assert p.derivative(n + 1)(J) == 0


# -- symmetry identities ------------------------------------------------------

def test_ward_exp_action_is_q_closed():
    # the supersymmetry annihilates e^{-S} for the *unpinned* action only;
    # pinning terms eps (sigma - 1) are not Q-closed, which is exactly why
    # the expansion identities keep e^{-eps0 sigma_0} inside the state
    g = WeightedGraph(2, [(0, 1, F(3, 5))], [0, 0])
    for n in (1, 2):
        m = build_action(g, n)
        for direction in "+-":
            for l in range(1, n + 1):
                assert apply_Q(m.exp_minus_action, direction, l).is_zero()
    pinned = build_action(WeightedGraph(2, [(0, 1, F(3, 5))], [F(1, 4), 0]), 1)
    assert not apply_Q(pinned.exp_minus_action, "+", 1).is_zero()


def _rand_elem(alg, rng, nterms=10):
    out = alg.zero()
    for _ in range(nterms):
        nbits = rng.randrange(0, alg.n_gen + 1)
        idxs = rng.sample(range(alg.n_gen), nbits)
        out = out + alg.monomial(sorted(idxs),
                                 F(rng.randrange(-9, 10) or 1, rng.randrange(1, 7)))
    return out


def test_state_kills_q_exact():
    g = WeightedGraph(2, [(0, 1, F(3, 5))], [0, 0])
    m = build_action(g, 1)
    rng = random.Random(7)
    for _ in range(6):
        y = _rand_elem(m.algebra, rng)
        for direction in "+-":
            assert unnormalized_state(m, apply_Q(y, direction, 1)) == 0


def test_integration_by_parts_q_form():
    # <<sigma_i F>> = <<psibar_i^l (Q_-^l F)>> = <<psi_i^l (Q_+^l F)>>,
    # exactly, for arbitrary F (zero pinning)
    g = WeightedGraph(2, [(0, 1, F(3, 5))], [0, 0])
    for n in (1, 2):
        m = build_action(g, n)
        alg = m.algebra
        rng = random.Random(100 + n)
        for trial in range(4):
            f = _rand_elem(alg, rng, 8)
            i = trial % 2
            lhs = unnormalized_state(m, alg.sigma(i) * f)
            r_minus = unnormalized_state(
                m, alg.psibar(i, 1) * apply_Q(f, "-", 1))
            r_plus = unnormalized_state(
                m, alg.psi(i, 1) * apply_Q(f, "+", 1))
            assert lhs == r_minus == r_plus


def test_ibp_needs_the_sigma_weights():
    # replacing Q^l = sum_i sigma_i d_i by the bare single-site derivative
    # breaks the identity: F = psibar_0 psi_1 is a counterexample for the
    # psi-route (and the psibar-route only matches by accident here).
    J = F(3, 5)
    g = WeightedGraph(2, [(0, 1, J)], [0, 0])
    m = build_action(g, 1)
    alg = m.algebra
    f = alg.psibar(0, 1) * alg.psi(1, 1)
    lhs = unnormalized_state(m, alg.sigma(0) * f)
    bare_psi = unnormalized_state(
        m, alg.psi(0, 1) * left_derivative(f, alg.gen_index(0, 1, False)))
    assert lhs == -J
    assert bare_psi == 0
    assert bare_psi != lhs


def test_sigma_power_expansion_identity():
    # with E = exp(-eps0 (sigma_0 - 1)) and F even in flavours <= L:
    # <<F s0^m E>> = eps0 <<F pi_0^{L+1} s0^{m-1} E>>
    #                - (m-1) <<F pi_0^{L+1} s0^{m-2} E>>
    g = WeightedGraph(2, [(0, 1, F(3, 5))], [0, 0])
    n, L = 2, 1
    m2 = build_action(g, n)
    alg = m2.algebra
    eps0 = F(2, 7)
    ex = nilpotent_exp(-eps0 * (alg.sigma(0) - alg.one()))
    pi_next = alg.pi(0, L + 1)
    s0 = alg.sigma(0)
    s0_inv = nilpotent_series(alg.one() + 2 * alg.pair_product(0, 0), F(-1, 2))

    def s0pow(p):
        if p == -1:
            return s0_inv
        out = alg.one()
        for _ in range(p):
            out = out * s0
        return out

    rng = random.Random(3)
    gens1 = [alg.gen_index(v, 1, b) for v in range(2) for b in (True, False)]
    for _ in range(3):
        f = alg.zero()
        for _ in range(6):
            k = 2 * rng.randrange(0, len(gens1) // 2 + 1)
            f = f + alg.monomial(sorted(rng.sample(gens1, k)),
                                 F(rng.randrange(-9, 10) or 2, rng.randrange(1, 7)))
        for mm in (1, 2, 3):
            lhs = unnormalized_state(m2, f * s0pow(mm) * ex)
            rhs = eps0 * unnormalized_state(m2, f * pi_next * s0pow(mm - 1) * ex)
            if mm >= 2:
                rhs -= (mm - 1) * unnormalized_state(
                    m2, f * pi_next * s0pow(mm - 2) * ex)
            assert lhs == rhs


# -- moments ------------------------------------------------------------------

def test_dual_moment_budget_and_validation():
    g = path_graph(3, eps={0: F(1, 2)})
    m = build_action(g, 2)
    with pytest.raises(IndexBudgetExceeded):
        dual_moment(m, 0, 2, n_tau=2, n_m=1)
    with pytest.raises(ValueError):
        dual_moment(m, 1, 1, n_tau=1, n_m=0)
    with pytest.raises(ValueError):
        dual_moment(m, 0, 2, n_tau=1, n_m=0, pi_components=(1, 1))
    with pytest.raises(ValueError):
        dual_moment(m, 0, 2, n_tau=1, n_m=0, pi_components=(2,))


def test_tau_moment_positive():
    g = path_graph(3, J=F(1, 2), eps={0: F(1, 3)})
    m = build_action(g, 1)
    val = dual_moment(m, 0, 2, n_tau=1, n_m=0)
    assert val > 0


def test_eta_moment_vanishes_by_symmetry():
    # pin the center of a path and take i, j mirror-symmetric around it:
    # the eta moment is odd under the reflection, so it must vanish
    g = WeightedGraph(3, [(0, 1, F(1, 2)), (1, 2, F(1, 2))],
                      [0, F(1, 3), 0], origin=1)
    m = build_action(g, 1)
    assert dual_moment(m, 0, 2, n_tau=0, n_m=0) == 0


def test_eta_squared_moment_positive():
    g = path_graph(3, J=F(1, 2), eps={0: F(1, 3)})
    m = build_action(g, 2)
    val = dual_moment(m, 0, 2, n_tau=0, n_m=0)  # two eta factors
    assert val > 0


def test_green_monomial_exponents():
    assert green_monomial_exponents(1, 1, 0) == \
        {"G1": 1, "G2": 0, "G00": 0, "G3": 0}
    assert green_monomial_exponents(2, 0, 0) == \
        {"G1": 0, "G2": 0, "G00": 0, "G3": 2}
    assert green_monomial_exponents(4, 2, 1, pi_components=(1, 3)) == \
        {"G1": 1, "G2": 1, "G00": 1, "G3": 1}
    with pytest.raises(IndexBudgetExceeded):
        green_monomial_exponents(1, 1, 1)


def test_expectation_zero_partition_guard(monkeypatch):
    g = complete_graph(2)
    m = build_action(g, 1)
    monkeypatch.setattr(fermionic, "unnormalized_state",
                        lambda model, obs=None, convention=None: F(0))
    with pytest.raises(ZeroPartition):
        expectation_fermionic(m, m.algebra.one())


def test_pair_observables_square_to_zero():
    g = complete_graph(2)
    m = build_action(g, 1)
    t = tau(m.algebra, 0, 1, 1)
    e = eta(m.algebra, 0, 1, 1)
    assert (t * t).is_zero()
    assert (e * e).is_zero()


# -- positivity scans ---------------------------------------------------------

def test_positivity_scan_single_policy():
    g = complete_graph(3)
    rows = positivity_scan(g, 2, "single", trials=4, seed=9, name="K3")
    assert len(rows) == 4 * 3  # trials x edges
    assert all(r.verdict == "ok" for r in rows)
    assert rows[0].asserted == (0, 1, 2)


def test_positivity_scan_two_point_policy():
    g = complete_graph(2)
    rows = positivity_scan(g, 3, "two_point", trials=6, seed=1, name="K2")
    assert all(r.verdict == "ok" for r in rows)
    # n=3: asserted orders are 0, 1, 2 (= ceil(3/2)) and 3
    assert rows[0].asserted == (0, 1, 2, 3)
    # n=4 has a genuinely unasserted middle order
    rows4 = positivity_scan(g, 4, "two_point", trials=2, seed=1, name="K2")
    assert rows4[0].asserted == (0, 1, 2, 4)


def test_positivity_scan_reports_violation(monkeypatch):
    bad = RationalPolynomial((F(1), F(-5)))  # negative first derivative

    monkeypatch.setattr(fermionic, "z_polynomial_in_edge",
                        lambda g, n, idx: bad)
    g = complete_graph(2)
    with pytest.raises(AssertionFailure) as exc:
        positivity_scan(g, 1, "two_point", trials=1, seed=77, name="K2")
    assert "seed=77" in str(exc.value)
    assert "trial=0" in str(exc.value)


def test_scan_csv_shape():
    g = complete_graph(2)
    rows = positivity_scan(g, 1, "single", trials=2, seed=0, name="K2")
    csv = scan_rows_to_csv(rows)
    lines = csv.strip().split("\n")
    assert lines[0].startswith("graph,n,edge_i")
    assert len(lines) == 1 + sum(len(r.coeffs) for r in rows)
    # rationals serialized as p/q, floats with 17 significant digits
    assert any("/" in ln for ln in lines[1:])

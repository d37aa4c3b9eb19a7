import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from spancent import (
    Graph,
    WalkBudget,
    candidate_rho,
    compute_spectral_basis,
    estimator_range_bound,
    exact_scores_pseudoinverse,
    hoeffding_sample_count,
    hybrid_scores,
    random_walk,
    sample_remainder,
    should_switch_to_walks,
    start_state,
    toward_source,
    transition_power_row,
    traverse_step,
    walk_sum_bounds,
)
from spancent.hybrid import _batch_walk_sums
from spancent.traversal import TraversalState

from conftest import er, full_basis, triangle


def k3_toward_v0(k3):
    # two-hop reach probabilities of node 0 on the 3-cycle
    return toward_source(k3, transition_power_row(k3, 0, 2))


# ---------------------------------------------------------------- walk bounds

def test_walk_bounds_k3_two_hops(k3):
    col = k3_toward_v0(k3)
    assert np.allclose(col, [0.5, 0.25, 0.25])
    b = walk_sum_bounds(k3, 0, col, rho_hat=0.75, length=2)
    assert b.lb == pytest.approx(0.5)
    assert b.ub == pytest.approx(0.75)
    assert set(np.round(oracles.all_walk_sums(k3, 0, 2, col), 12)) == {0.5, 0.75}


def test_walk_bounds_single_hop_form(small_er):
    g = small_er
    col = toward_source(g, transition_power_row(g, 3, 2))
    for start in (0, 5, 17):
        b = walk_sum_bounds(g, start, col, rho_hat=1.0, length=1)
        near = col[g.neighbors(start)]
        assert b.lb == pytest.approx(near.min())
        assert b.ub == pytest.approx(near.max() / 2.0 + col.max() / 2.0)


def test_walk_bounds_contain_enumerated_sums(small_er):
    g = small_er
    col = toward_source(g, transition_power_row(g, 8, 3))
    rho = candidate_rho(g, col, 10)
    for start, length in [(8, 2), (2, 3)]:
        b = walk_sum_bounds(g, start, col, rho, length)
        sums = oracles.all_walk_sums(g, start, length, col)
        assert min(sums) >= b.lb - 1e-12
        assert max(sums) <= b.ub + 1e-12


def test_walk_bounds_contain_sampled_sums_bulk(medium_er):
    g = medium_er
    col = toward_source(g, transition_power_row(g, 11, 2))
    rho = candidate_rho(g, col, 10)
    rng = np.random.default_rng(5)
    for start, length in [(11, 4), (40, 6)]:
        b = walk_sum_bounds(g, start, col, rho, length)
        sums = _batch_walk_sums(
            g, np.full(50_000, start, np.int64), length, col, rng
        )
        assert sums.min() >= b.lb - 1e-12
        assert sums.max() <= b.ub + 1e-12


# --------------------------------------------------------------- range bounds

def test_range_bound_k3_examples(k3):
    col = k3_toward_v0(k3)
    chi = estimator_range_bound(k3, (0, 1), col, gamma=2, remaining_len=2)
    assert chi == pytest.approx(0.625)
    chi0 = estimator_range_bound(k3, (0, 1), col, gamma=0, remaining_len=2)
    assert chi0 == pytest.approx(1.0)


def test_candidate_rho_k3(k3):
    col = k3_toward_v0(k3)
    # candidates {0, 1} (tie at 0.25 broken by id) form an edge
    assert candidate_rho(k3, col, 2) == pytest.approx(0.75)


def test_candidate_rho_dominates_brute_force(medium_er):
    g = medium_er
    for src, hop in [(0, 1), (3, 2), (9, 3)]:
        col = toward_source(g, transition_power_row(g, src, hop))
        brute = oracles.brute_adjacent_pair_max(g, col)
        for gamma in (1, 2, 10, 100, 10_000):
            assert candidate_rho(g, col, gamma) >= brute - 1e-12


def test_candidate_rho_exact_when_gamma_covers_graph(small_er):
    g = small_er
    col = toward_source(g, transition_power_row(g, 2, 2))
    brute = oracles.brute_adjacent_pair_max(g, col)
    assert candidate_rho(g, col, g.n) == pytest.approx(brute)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 500), gamma=st.integers(1, 40), hop=st.integers(0, 4))
def test_candidate_rho_property(seed, gamma, hop):
    g = er(24, 60, seed=seed)
    col = toward_source(g, transition_power_row(g, seed % g.n, hop))
    assert candidate_rho(g, col, gamma) >= oracles.brute_adjacent_pair_max(g, col) - 1e-12


# --------------------------------------------------------------- sample count

def test_sample_count_frozen_example():
    # 8 * 0.1^2 * ln(18) / (2^2 * 0.05^2), rounded up
    want = math.ceil(8 * 0.01 * math.log(18.0) / (4 * 0.0025))
    assert want == 24
    assert hoeffding_sample_count(0.1, 2, 0.05, 1.0 / 3.0, 3) == 24


def test_sample_count_zero_range():
    assert hoeffding_sample_count(0.0, 2, 0.05, 0.5, 10) == 0


def test_sample_count_quadruples_when_budget_halves():
    base = hoeffding_sample_count(0.2, 3, 0.04, 0.1, 50)
    finer = hoeffding_sample_count(0.2, 3, 0.02, 0.1, 50)
    assert abs(finer - 4 * base) <= 1


def test_sample_count_capped_loudly():
    with pytest.warns(UserWarning, match="capped"):
        assert hoeffding_sample_count(50.0, 1, 1e-6, 0.5, 10) == 100_000_000


# --------------------------------------------------------------- switch rule

def _artificial_state(g, source, current, g_acc=None):
    support = np.flatnonzero(current)
    return TraversalState(
        source=source,
        hop=1,
        current=current,
        active=support,
        frontier_degree_sum=int(g.degrees[support].sum()),
        g_acc=g_acc if g_acc is not None else np.zeros(g.degrees[source]),
    )


def test_switch_false_on_empty_frontier(k3):
    state = _artificial_state(k3, 0, np.zeros(3))
    pending = [((0, 1), 5), ((0, 2), 5)]
    assert not should_switch_to_walks(k3, state, pending, 0.0125, 1.0 / 3.0)


def test_switch_true_when_nothing_pending(k3):
    state = traverse_step(k3, start_state(k3, 0))
    pending = [((0, 1), 1), ((0, 2), 1)]  # both already reached at hop 1
    assert should_switch_to_walks(k3, state, pending, 0.0125, 1.0 / 3.0)


def test_switch_true_for_star_center_with_tiny_budget():
    spokes = [(0, k) for k in range(1, 51)]
    g = Graph.from_edges(spokes + [(1, 2)])
    state = traverse_step(g, start_state(g, 0))
    assert state.frontier_degree_sum >= 50
    pending = [((0, 1), 2)]  # single short edge left: a couple of walks suffice
    assert should_switch_to_walks(g, state, pending, 0.225, 0.5)


def test_switch_false_while_budgets_dominate(k3):
    state = start_state(k3, 0)
    pending = [((0, 1), 5), ((0, 2), 5)]
    assert not should_switch_to_walks(k3, state, pending, 0.0125, 1.0 / 3.0)


# --------------------------------------------------------------------- walks

def test_forced_walk_on_single_edge():
    g = Graph.from_edges([(0, 1)])
    walk = random_walk(g, 0, 3, np.random.default_rng(0))
    assert walk.tolist() == [1, 0, 1]


def test_walk_first_hop_frequencies(k3):
    rng = np.random.default_rng(42)
    hits = np.zeros(3)
    draws = 30_000
    sums = _batch_walk_sums(k3, np.zeros(draws, np.int64), 1, np.eye(3)[1], rng)
    hits = sums.mean()  # indicator of landing on node 1
    assert abs(hits - 0.5) < 0.02


def test_walk_occupancy_matches_transition_powers(small_er):
    g = small_er
    rng = np.random.default_rng(7)
    start, hops, draws = 6, 4, 100_000
    pos = np.full(draws, start, np.int64)
    for _ in range(hops):
        step = rng.integers(0, g.degrees[pos])
        pos = g.indices[g.indptr[pos] + step]
    freq = np.bincount(pos, minlength=g.n) / draws
    want = transition_power_row(g, start, hops).values
    sigma = np.sqrt(np.maximum(want * (1 - want), 1e-12) / draws)
    assert (np.abs(freq - want) <= 3 * sigma + 5e-4).all()


# ---------------------------------------------------------------- remainders

def test_remainder_zero_when_no_length_left(k3):
    col = k3_toward_v0(k3)
    budget = WalkBudget(edge=(0, 1), remaining_len=0, chi=0.5, n_r=10)
    with pytest.raises(ValueError):
        sample_remainder(k3, (0, 1), col, budget, np.random.default_rng(0))
    empty = WalkBudget(edge=(0, 1), remaining_len=2, chi=0.5, n_r=0)
    assert sample_remainder(k3, (0, 1), col, empty, np.random.default_rng(0)) == 0.0


def test_remainder_unbiased_k3(k3):
    tau_tilde, tau = 1, 3
    dist = transition_power_row(k3, 0, tau_tilde)
    col = toward_source(k3, dist)
    chi = estimator_range_bound(k3, (0, 1), col, gamma=2, remaining_len=tau - tau_tilde)
    n_r = 1_000_000
    budget = WalkBudget(edge=(0, 1), remaining_len=tau - tau_tilde, chi=chi, n_r=n_r)
    got = sample_remainder(k3, (0, 1), col, budget, np.random.default_rng(3))
    powers = oracles.transition_powers(k3, tau)
    want = oracles.walk_remainder(k3, 0, 1, tau_tilde, tau, powers)
    sigma_bound = (chi / k3.degrees[0]) / math.sqrt(n_r)
    assert abs(got - want) <= 3 * sigma_bound


def test_remainder_unbiased_small_er():
    g = er(12, 26, seed=4)
    tau_tilde, tau = 2, 6
    src = 0
    j = int(g.neighbors(src)[0])
    col = toward_source(g, transition_power_row(g, src, tau_tilde))
    chi = estimator_range_bound(g, (src, j), col, gamma=10, remaining_len=tau - tau_tilde)
    n_r = 1_000_000
    budget = WalkBudget(edge=(src, j), remaining_len=tau - tau_tilde, chi=chi, n_r=n_r)
    got = sample_remainder(g, (src, j), col, budget, np.random.default_rng(11))
    powers = oracles.transition_powers(g, tau)
    want = oracles.walk_remainder(g, src, j, tau_tilde, tau, powers)
    sigma_bound = (chi / g.degrees[src]) / math.sqrt(n_r)
    assert abs(got - want) <= 3 * sigma_bound


def test_decomposition_identity_dense():
    for g in (triangle(), er(30, 80, seed=2), er(64, 180, seed=6)):
        powers = oracles.transition_powers(g, 12)
        for u, v in zip(g.edge_u, g.edge_v):
            i, j = int(u), int(v)
            for tau in range(0, 13, 3):
                full = oracles.g_partial(g, i, j, tau, powers)
                for tau_tilde in range(tau + 1):
                    part = oracles.g_partial(g, i, j, tau_tilde, powers)
                    rest = oracles.walk_remainder(g, i, j, tau_tilde, tau, powers)
                    assert abs(full - (part + rest)) < 1e-9


# ------------------------------------------------------------------ full run

def test_k3_probabilistic_guarantee(k3, k3_basis):
    failures = 0
    for seed in range(20):
        scores = hybrid_scores(k3, k3_basis, 0.05, 1.0 / 3.0, gamma=2, seed=seed)
        if np.abs(scores.values - 2.0 / 3.0).max() > 0.05:
            failures += 1
    assert failures <= 1


def test_er_accuracy_well_below_budget(medium_er, medium_er_basis):
    g = medium_er
    scores = hybrid_scores(g, medium_er_basis, 0.05, 1.0 / g.n, gamma=10, seed=0)
    exact = exact_scores_pseudoinverse(g).values
    gap = np.abs(scores.values - exact)
    assert gap.max() <= 0.05
    assert gap.mean() < 0.0125  # typical error sits far inside the budget


def test_deterministic_for_fixed_seed(medium_er, medium_er_basis):
    a = hybrid_scores(medium_er, medium_er_basis, 0.05, 0.01, gamma=10, seed=9)
    b = hybrid_scores(medium_er, medium_er_basis, 0.05, 0.01, gamma=9 + 1, seed=9)
    assert np.array_equal(a.values, b.values)
    c = hybrid_scores(medium_er, medium_er_basis, 0.05, 0.01, gamma=10, seed=10)
    assert not np.array_equal(a.values, c.values)


def test_threads_do_not_change_results(medium_er, medium_er_basis):
    a = hybrid_scores(medium_er, medium_er_basis, 0.05, 0.01, seed=4, threads=1)
    b = hybrid_scores(medium_er, medium_er_basis, 0.05, 0.01, seed=4, threads=3)
    assert np.array_equal(a.values, b.values)


def test_gamma_zero_path(medium_er, medium_er_basis):
    g = medium_er
    scores = hybrid_scores(g, medium_er_basis, 0.1, 1.0 / g.n, gamma=0, seed=1)
    exact = exact_scores_pseudoinverse(g).values
    assert np.abs(scores.values - exact).max() <= 0.1


def test_rejects_bad_parameters(k3, k3_basis):
    with pytest.raises(ValueError):
        hybrid_scores(k3, k3_basis, 0.0, 0.1)
    with pytest.raises(ValueError):
        hybrid_scores(k3, k3_basis, 0.1, 1.5)
    with pytest.raises(ValueError):
        hybrid_scores(k3, k3_basis, 0.1, 0.1, gamma=-1)


# ------------------------------------------------- engine/reference agreement

def test_engine_stopping_depths_match_reference_replay(medium_er, medium_er_basis):
    """The compiled per-source engine must make the same switch decisions as
    a replay built from the public single-step operations."""
    from spancent.truncation import compute_truncation_table

    g = medium_er
    eps, delta = 0.05, 1.0 / g.n
    _, diag = hybrid_scores(
        g, medium_er_basis, eps, delta, gamma=10, seed=0, return_diagnostics=True
    )
    table = compute_truncation_table(g, medium_er_basis, eps / 2.0)
    for src in range(0, g.n, 17):
        nbrs = g.neighbors(src)
        taus = table.taus_for_source(g, src)
        pending = [((src, int(j)), int(t)) for j, t in zip(nbrs, taus)]
        state = start_state(g, src)
        depth_cap = int(taus.max())
        while state.hop < depth_cap and not should_switch_to_walks(
            g, state, pending, eps / 4.0, delta
        ):
            state = traverse_step(g, state)
        assert diag["tilde"][src] == state.hop


def test_engine_budgets_match_reference_formulas():
    """Per-edge range bounds and walk counts from the engine must equal the
    public operations evaluated on the engine's own stopping depth."""
    g = er(1200, 18_000, seed=11)  # dense enough that the switch fires early
    basis = compute_spectral_basis(g, 128)
    eps, delta, gamma = 0.05, 1.0 / g.n, 10
    _, diag = hybrid_scores(
        g, basis, eps, delta, gamma=gamma, seed=0, return_diagnostics=True
    )
    assert diag["n_r"].sum() > 0
    sampled_sources = np.unique(
        np.searchsorted(g.indptr, np.flatnonzero(diag["n_r"] > 0), side="right") - 1
    )
    checked = 0
    for src in sampled_sources[:25]:
        src = int(src)
        tilde = int(diag["tilde"][src])
        col = toward_source(g, transition_power_row(g, src, tilde))
        lo = int(g.indptr[src])
        for local, j in enumerate(g.neighbors(src)):
            tau = int(diag["taus"][g.arc_edge_id[lo + local]])
            if tau <= tilde:
                assert diag["n_r"][lo + local] == 0
                continue
            chi = estimator_range_bound(g, (src, int(j)), col, gamma, tau - tilde)
            assert diag["chi"][lo + local] == pytest.approx(chi, rel=1e-11, abs=1e-13)
            want = hoeffding_sample_count(
                diag["chi"][lo + local], int(g.degrees[src]), eps / 4.0, delta, g.m
            )
            assert diag["n_r"][lo + local] == want
            checked += 1
    assert checked > 50


def test_engine_equals_pure_traversal_when_nothing_pending(k3, k4):
    """On graphs where the switch never fires early there is no sampling, so
    the hybrid result must coincide with the plain truncated traversal."""
    from spancent.truncation import compute_truncation_table
    from spancent import truncated_traversal_scores

    for g in (k3, k4):
        basis = full_basis(g)
        eps = 0.05
        scores, diag = hybrid_scores(
            g, basis, eps, 1.0 / 3.0, gamma=2, seed=0, return_diagnostics=True
        )
        assert diag["n_r"].sum() == 0
        table = compute_truncation_table(g, basis, eps / 2.0)
        reference = truncated_traversal_scores(g, basis, eps, table=table)
        assert np.abs(scores.values - reference.values).max() < 1e-14

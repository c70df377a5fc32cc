"""
Tests for mode 2: the sampled-graph push protocol and its coupling with the
complete-graph process
"""
from collections import Counter

import numpy as np
import pytest

from app.core.mode2 import (
    TriStateEdges, incompatibility_bound, incompatibility_trace, run_mode2_coupled,
    run_mode2_direct, sample_er_graph,
)
from app.core.oracle import exact_small_distribution
from app.core.resource import make_law
from app.core.rng_streams import make_source
from app.core.stats import chi_square_test
from app.core.words import child


def test_graph_extremes():
    law = make_law(constant=1)
    empty = sample_er_graph(make_source(1, 8, 0.0, law))
    assert empty.open_edges() == 0
    full = sample_er_graph(make_source(1, 8, 1.0, law))
    assert full.matrix.all()
    assert full.open_edges() == 8 * 9 // 2
    assert list(full.neighbors(3)) == list(range(1, 9))


def test_graph_is_symmetric_with_expected_density():
    law = make_law(constant=1)
    n, p = 50, 0.3
    fractions = []
    for seed in range(40):
        graph = sample_er_graph(make_source(seed, n, p, law))
        assert (graph.matrix == graph.matrix.T).all()
        fractions.append(graph.open_edges() / (n * (n + 1) / 2))
    assert np.mean(fractions) == pytest.approx(p, abs=0.01)


def test_graph_uses_fill_family():
    law = make_law(constant=1)
    src = make_source(6, 6, 0.5, law)
    graph = sample_er_graph(src)
    for i in range(1, 7):
        for j in range(i, 7):
            assert graph.is_open(i, j) == bool(src.draw_bernoulli(i, -j))
            assert graph.is_open(j, i) == graph.is_open(i, j)


def test_direct_trivial_cases():
    out = run_mode2_direct(make_source(2, 10, 0.5, make_law(constant=0)))
    assert out.final_informed == 1 and out.tau == 0
    out = run_mode2_direct(make_source(2, 10, 0.0, make_law(constant=3)))
    assert out.final_informed == 1


@pytest.mark.parametrize("seed", range(20))
def test_direct_pushes_only_along_open_edges(seed):
    src = make_source(seed, 30, 0.2, make_law({1: 0.5, 3: 0.5}))
    out = run_mode2_direct(src, trace=True)
    assert len(out.order) == len(set(out.order)) == out.final_informed
    assert out.tau == out.final_informed - 1
    assert out.trace[-1][2] == 0
    reached = {out.order[0]}
    for i in out.order[1:]:
        assert any(out.graph.is_open(i, j) for j in reached)
        reached.add(i)


def test_tri_state_edges_keep_first_status():
    edges = TriStateEdges(3)
    assert edges.get(1, 2) is None
    assert edges.assign(2, 1, 0) == 0
    assert edges.assign(1, 2, 1) == 0
    assert edges.get(1, 2) == 0
    edges.assign(1, 1, 0)
    edges.assign(1, 3, 0)
    assert edges.isolated(1)
    assert not edges.isolated(2)
    assert len(edges) == 3


def test_coupled_p1_collapses():
    law = make_law({0: 0.2, 2: 0.4, 3: 0.4})
    for seed in range(30):
        out = run_mode2_coupled(make_source(seed, 25, 1.0, law))
        assert out.tilde_tau == out.tau_cg == out.tau_bar_er
        assert out.er_informed == out.cg_informed
        assert all(r["card_inc0"] == r["card_inc1"] == r["m"] == 0 for r in incompatibility_trace(out))


def test_coupled_zero_resource():
    out = run_mode2_coupled(make_source(3, 10, 0.5, make_law(constant=0)))
    assert out.tilde_tau == out.tau_cg == out.tau_bar_er == 0
    assert out.final_er == out.final_cg == 1


def test_coupled_zero_p_emits_nothing():
    out = run_mode2_coupled(make_source(3, 10, 0.0, make_law(constant=2)))
    assert out.final_er == 1
    assert out.bursts[0].attempts == []


@pytest.mark.parametrize("p", [0.3, 0.6])
def test_burst_records_recompute(p):
    law = make_law({1: 0.3, 2: 0.3, 4: 0.4})
    for seed in range(60):
        out = run_mode2_coupled(make_source(seed, 12, p, law))
        for burst in out.bursts:
            ones = [bit for _, _, bit, _ in burst.attempts]
            assert sum(ones) == burst.k_i
            if burst.attempts:
                assert burst.attempts[-1][2] == 1
            inc0 = [child(burst.word, k) for k, _, bit, status in burst.attempts if bit == 1 and status == 0]
            inc1 = [child(burst.word, k) for k, _, bit, status in burst.attempts if bit == 0 and status == 1]
            assert burst.inc0 == inc0
            assert burst.inc1 == inc1
            assert burst.m == max(len(inc0) - len(inc1), 0)
            assert len(burst.placeholders) == burst.m

            used = sum(status for k, _, _, status in burst.attempts if k <= burst.t_prime)
            assert used <= burst.k_i
            later = [status for k, _, _, status in burst.attempts if k > burst.t_prime]
            if later:
                assert used + later[0] > burst.k_i


@pytest.mark.parametrize("seed", range(40))
def test_delayed_sets_bounded_by_incompatible_pairs(seed):
    src = make_source(seed, 15, 0.5, make_law({1: 0.4, 3: 0.6}))
    bound = incompatibility_bound(src)
    out = run_mode2_coupled(src)
    for step in out.steps:
        assert step.card_d_er <= bound
        assert step.card_d_cg <= bound


def test_coupled_statuses_never_flip():
    src = make_source(21, 10, 0.5, make_law(constant=3))
    out = run_mode2_coupled(src)
    final = out.edges.as_dict()
    for burst in out.bursts:
        for _, j, _, status in burst.attempts:
            assert final[TriStateEdges.key(burst.label, j)] == status


def test_direct_matches_complete_chain_at_p1():
    law = make_law(constant=1)
    direct = exact_small_distribution("er2", 3, 1.0, law)
    chain = exact_small_distribution("complete", 3, 1.0, law)
    assert direct.keys() == chain.keys()
    for k in chain:
        assert direct[k] == pytest.approx(chain[k], abs=1e-12)


def test_direct_two_servers_full_graph():
    pmf = exact_small_distribution("er2", 2, 1.0, make_law(constant=1))
    assert pmf[2] == pytest.approx(0.5)


def test_coupled_marginals_match_exact_laws():
    law = make_law(constant=1)
    n, p, runs = 3, 0.5, 20_000
    er_counts, cg_counts = Counter(), Counter()
    for seed in range(runs):
        out = run_mode2_coupled(make_source(seed, n, p, law))
        er_counts[out.final_er] += 1
        cg_counts[out.final_cg] += 1
    er_exact = exact_small_distribution("er2", n, p, law)
    cg_exact = exact_small_distribution("complete", n, p, law)
    assert chi_square_test(er_counts, er_exact).p_value > 0.001
    assert chi_square_test(cg_counts, cg_exact).p_value > 0.001

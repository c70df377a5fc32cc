"""
Tests for the word order, the three tree explorations and their coupling
"""
import itertools

import numpy as np
import pytest

from app.core.resource import make_law
from app.core.rng_streams import Family, TableSource, make_source
from app.core.tree_explore import (
    Attempt, BurstCache, burst_mismatches, coupling_gap_summary, edge_key, edge_status_total,
    mismatch_bound, run_cg_sequential, run_coupled_delayed, run_er_mode1, verify_coupling,
)
from app.core.words import ROOT, OrderedWordSet, word_compare


def test_word_order():
    assert word_compare(ROOT, (1,)) == -1
    assert word_compare((2,), (1, 1)) == -1
    assert word_compare((1, 2), (1, 3)) == -1
    assert word_compare((1, 3), (1, 3)) == 0
    assert word_compare((1, 1, 1), (5,)) == 1


def test_ordered_word_set():
    words = OrderedWordSet([(2, 1), (3,), (1, 4), (1,)])
    assert words.min() == (1,)
    assert not words.add((3,))
    assert words.discard((1, 4))
    assert [words.pop_min() for _ in range(len(words))] == [(1,), (3,), (2, 1)]
    assert not words
    with pytest.raises(KeyError):
        words.pop_min()


def test_ordered_word_set_discard_then_readd():
    words = OrderedWordSet([(1,), (2,), (1, 1)])
    assert words.discard((1,))
    assert words.min() == (2,)
    assert len(words) == 2
    assert words.add((1,))
    assert list(words) == [(1,), (2,), (1, 1)]
    assert [words.pop_min() for _ in range(len(words))] == [(1,), (2,), (1, 1)]
    assert words.min() is None
    assert not words


def test_er1_trivial_cases():
    law = make_law(constant=0)
    out = run_er_mode1(make_source(1, 10, 0.5, law))
    assert (out.tau, out.final_informed) == (0, 1)
    law = make_law(constant=2)
    out = run_er_mode1(make_source(1, 10, 0.0, law))
    assert (out.tau, out.final_informed) == (0, 1)


@pytest.mark.parametrize("seed", range(20))
def test_er1_tree_shape(seed):
    law = make_law({0: 0.3, 2: 0.3, 3: 0.4})
    out = run_er_mode1(make_source(seed, 30, 0.6, law), trace=True)
    assert out.final_informed == out.tau + 1
    assert len(set(out.labels.values())) == len(out.labels)
    for w in out.labels:
        assert w == ROOT or w[:-1] in out.labels
    assert [row.card_exhausted for row in out.trace] == list(range(1, out.tau + 2))


def test_er1_within_burst_dedup_covers_closed_attempts():
    law = make_law(constant=2)
    overrides = {
        (Family.INITIAL, 0, 0): 1,
        (Family.TARGET, 1, 1): 2, (Family.BERNOULLI, 1, 1): 0,
        (Family.TARGET, 1, 2): 2, (Family.BERNOULLI, 1, 2): 1,
    }
    src = TableSource(master_seed=0, n=3, p=0.5, law=law, overrides=overrides)
    er = run_er_mode1(src)
    cg = run_cg_sequential(src)
    assert er.final_informed == 1
    assert 2 in cg.labels.values()
    assert burst_mismatches(BurstCache(src).attempts(1)) == 1


@pytest.mark.parametrize(
    "attempts, expected",
    [
        ([Attempt(1, 2, 1), Attempt(2, 2, 0), Attempt(3, 2, 1)], 1),
        ([Attempt(1, 2, 0), Attempt(2, 2, 1), Attempt(3, 2, 1)], 1),
        ([Attempt(1, 2, 1), Attempt(2, 2, 0)], 0),
        ([Attempt(1, 2, 0), Attempt(2, 3, 1), Attempt(3, 3, 0)], 0),
        ([Attempt(1, 2, 0), Attempt(2, 2, 1), Attempt(3, 4, 0), Attempt(4, 4, 1)], 2),
    ],
)
def test_burst_mismatches_counts_open_after_closed(attempts, expected):
    assert burst_mismatches(attempts) == expected


@pytest.mark.parametrize("seed", range(100))
def test_p1_er1_matches_sequential(seed):
    law = make_law({0: 0.5, 3: 0.5})
    src = make_source(seed, 30, 1.0, law)
    er, cg = run_er_mode1(src), run_cg_sequential(src)
    assert er.tau == cg.tau
    assert er.labels == cg.labels
    assert er.emitters == cg.emitters


def test_sequential_zero_resource():
    law = make_law(constant=0)
    out = run_cg_sequential(make_source(2, 5, 0.5, law))
    assert out.tau == 0 and out.open_attempts == 0


def test_coupling_invariants_sweep():
    laws = [make_law(constant=2), make_law({0: 0.5, 3: 0.5})]
    rng = np.random.default_rng(314)
    checked = 0
    for law, p in itertools.product(laws, (0.3, 0.7)):
        for _ in range(250):
            n = int(rng.integers(2, 51))
            seed = int(rng.integers(0, 2**62))
            problems = verify_coupling(make_source(seed, n, p, law))
            assert problems == [], (seed, n, p, problems)
            checked += 1
    assert checked == 1000


def test_coupled_p1_has_no_delay():
    law = make_law({0: 0.4, 2: 0.3, 4: 0.3})
    for seed in range(30):
        out = run_coupled_delayed(make_source(seed, 25, 1.0, law))
        assert out.tau_cgd == out.tau_er
        assert set(out.delayed_sizes) == {0}
        assert out.final_er == out.final_cgd


def test_coupled_zero_resource():
    law = make_law(constant=0)
    out = run_coupled_delayed(make_source(5, 8, 0.5, law))
    assert out.tau_er == out.tau_cgd == 0


def test_mismatch_bound_trivial_cases():
    assert mismatch_bound(make_source(3, 20, 1.0, make_law(constant=3))) == 0
    assert mismatch_bound(make_source(3, 20, 0.5, make_law(constant=1))) == 0


def test_edge_status_total_extremes():
    law = make_law(constant=2)
    src = make_source(9, 6, 1.0, law)
    table = edge_status_total(run_er_mode1(src), src)
    assert len(table) == 6 * 7 // 2
    assert set(table.values()) == {1}

    src = make_source(9, 6, 0.5, law)
    out = run_er_mode1(src)
    table = edge_status_total(out, src)
    for (i, j), seen in out.edges.items():
        assert table[(i, j)] == seen.bit
        emitter = out.labels[out.emitters[seen.t]]
        assert edge_key(emitter, src.draw_target(emitter, seen.k)) == (i, j)
        assert src.draw_bernoulli(emitter, seen.k) == seen.bit


def test_edge_statuses_are_iid():
    law = make_law(constant=2)
    n, p, replicas = 5, 0.4, 10_000
    pairs = [(i, j) for i in range(1, n + 1) for j in range(i, n + 1)]
    rows = np.zeros((replicas, len(pairs)))
    for r in range(replicas):
        src = make_source(r, n, p, law)
        table = edge_status_total(run_er_mode1(src), src)
        rows[r] = [table[e] for e in pairs]
    assert rows.mean() == pytest.approx(p, abs=0.01)
    corr = np.corrcoef(rows, rowvar=False)
    off_diagonal = corr[~np.eye(len(pairs), dtype=bool)]
    assert np.abs(off_diagonal).max() < 0.05


def test_coupling_gap_summary():
    law = make_law(constant=2)
    outcomes = [run_coupled_delayed(make_source(s, 20, 1.0, law)) for s in range(10)]
    summary = coupling_gap_summary(outcomes)
    assert summary["runs"] == 10
    assert summary["tau_gap_max"] == 0
    assert summary["tau_gap_counts"] == {0: 10}
    assert summary["extra_words_mean"] == 0.0

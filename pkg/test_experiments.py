"""
Tests for the Monte Carlo harness and the goodness-of-fit statistics
"""
import math
from collections import Counter

import numpy as np
import pytest

from app.core.experiments import (
    THEORY_MODE, resolve_epsilon, run_replicas, simulate_once, summarize, theory_for,
)
from app.core.resource import make_law
from app.core.rng_streams import make_source
from app.core.stats import (
    chi_square, chi_square_test, chi_square_two_sample, ks_critical_value, ks_statistic, mean_and_stderr,
)
from app.errors import ConfigurationError, DomainError
from app.models import ExperimentConfig, LawSpec, ReplicaRecord


def _config(**overrides):
    values = dict(model="er1", n=50, p=0.5, law=LawSpec(constant=4), replicas=10, base_seed=7)
    values.update(overrides)
    return ExperimentConfig(**values)


# --- statistics ---

def test_ks_against_the_target_gaussian():
    samples = np.random.default_rng(12345).normal(0.0, math.sqrt(2.0), 10_000)
    assert ks_statistic(samples, 2.0) < 1.95 / math.sqrt(10_000)
    assert ks_critical_value(10_000) == pytest.approx(0.0163)


def test_ks_total_separation():
    samples = np.random.default_rng(1).normal(10.0, 1.0, 2000)
    assert ks_statistic(samples, 1.0) > 0.99


def test_ks_errors():
    with pytest.raises(DomainError):
        ks_statistic([0.1, 0.2], 0.0)
    with pytest.raises(DomainError):
        ks_statistic([], 1.0)


def test_chi_square_identical_pmf():
    assert chi_square({1: 750, 2: 250}, {1: 0.75, 2: 0.25}) == 0.0
    result = chi_square_test({1: 750, 2: 250}, {1: 0.75, 2: 0.25})
    assert (result.dof, result.p_value) == (1, 1.0)


def test_chi_square_merges_small_cells():
    expected = {1: 0.5, 2: 0.49, 3: 0.005, 4: 0.005}
    result = chi_square_test({1: 100, 2: 98, 3: 1, 4: 1}, expected)
    assert result.dof == 1
    assert result.statistic == pytest.approx(0.0)


def test_chi_square_rejects_impossible_outcomes():
    with pytest.raises(DomainError):
        chi_square_test({1: 10, 3: 1}, {1: 0.5, 2: 0.5})
    with pytest.raises(DomainError):
        chi_square_test({}, {1: 1.0})


def test_two_sample_chi_square():
    same = chi_square_two_sample({1: 300, 2: 700}, {1: 300, 2: 700})
    assert same.statistic == pytest.approx(0.0)
    assert same.p_value == pytest.approx(1.0)
    different = chi_square_two_sample({1: 900, 2: 100}, {1: 100, 2: 900})
    assert different.p_value < 1e-6


def test_mean_and_stderr():
    assert mean_and_stderr([2.0]) == (2.0, 0.0)
    mean, stderr = mean_and_stderr([1.0, 2.0, 3.0])
    assert mean == pytest.approx(2.0)
    assert stderr == pytest.approx(1.0 / math.sqrt(3))
    with pytest.raises(DomainError):
        mean_and_stderr([])


# --- harness ---

def test_theory_modes():
    assert THEORY_MODE["er1"] == THEORY_MODE["cg-seq"] == THEORY_MODE["coupled"] == 1
    assert THEORY_MODE["complete"] == THEORY_MODE["er2"] == THEORY_MODE["er2-coupled"] == 2
    assert theory_for(_config(model="er1")).q_star == pytest.approx(0.7968121, abs=1e-7)
    assert theory_for(_config(model="er2")).q_star == pytest.approx(0.9802, abs=1e-3)


def test_epsilon_defaults_and_bounds():
    config = _config()
    prediction = theory_for(config)
    assert resolve_epsilon(config, prediction) == pytest.approx(prediction.q_star / 2)
    assert resolve_epsilon(_config(survival_epsilon=0.3), prediction) == 0.3
    with pytest.raises(ConfigurationError):
        resolve_epsilon(_config(survival_epsilon=0.9), prediction)
    sub = _config(law=LawSpec(constant=1))
    assert resolve_epsilon(sub, theory_for(sub)) == 0.5


def test_zero_resource_replica():
    records = run_replicas(_config(n=10, law=LawSpec(constant=0), replicas=1))
    assert len(records) == 1
    record = records[0]
    assert (record.tau, record.final_informed, record.survived) == (0, 1, False)
    assert record.standardized is None


def test_replicas_are_deterministic():
    config = _config(replicas=12)
    first, second = run_replicas(config), run_replicas(config)
    assert first == second
    assert [r.replica_id for r in first] == list(range(12))
    assert len({r.seed for r in first}) == 12


def test_worker_pool_gives_same_records():
    config = _config(model="coupled", replicas=8)
    assert run_replicas(config, jobs=2) == run_replicas(config, jobs=1)


@pytest.mark.parametrize("model", ["complete", "er1", "er2", "cg-seq", "coupled", "er2-coupled"])
def test_records_are_consistent(model):
    config = _config(model=model, n=40, law=LawSpec(pmf=[(0, 0.2), (2, 0.3), (4, 0.5)]), replicas=15)
    prediction = theory_for(config)
    epsilon = resolve_epsilon(config, prediction)
    for record in run_replicas(config):
        assert 1 <= record.final_informed <= config.n
        assert record.survived == (record.final_informed > epsilon * config.n)
        assert (record.standardized is not None) == record.survived
        if record.survived:
            expected = (record.final_informed - config.n * prediction.q_star) / math.sqrt(config.n)
            assert record.standardized == pytest.approx(expected)


def test_simulate_once_extras():
    law = make_law(constant=2)
    coupled = simulate_once("coupled", make_source(3, 30, 1.0, law), trace="summary")
    assert coupled.extra["tau_er"] == coupled.extra["tau_cgd"] == coupled.tau
    assert coupled.trace_header[0] == "t"
    assert len(coupled.trace_rows) == coupled.tau + 1
    joint = simulate_once("er2-coupled", make_source(3, 30, 0.5, law), trace="summary")
    assert set(joint.extra) == {"tilde_tau", "tau_cg", "final_cg"}
    full = simulate_once("er1", make_source(3, 30, 0.5, law), trace="full")
    assert full.snapshots[0]["t"] == 0
    assert full.snapshots[0]["tree"][0] == []
    with pytest.raises(ConfigurationError):
        simulate_once("ring", make_source(3, 30, 0.5, law))


def _record(i, final, survived, standardized=None):
    return ReplicaRecord(
        replica_id=i, seed=i, tau=final - 1, final_informed=final, survived=survived, standardized=standardized
    )


def test_summary_of_extinct_batch():
    config = _config(law=LawSpec(constant=1), n=100)
    records = [_record(i, 3, False) for i in range(20)]
    summary = summarize(records, theory_for(config), config)
    assert summary.survival_fraction == 0.0
    assert summary.conditional_mean_tau_over_n is None
    assert summary.ks_distance is None
    assert not summary.insufficient_data


def test_summary_of_degenerate_survivors():
    config = _config(n=1000)
    prediction = theory_for(config)
    final = round(config.n * prediction.q_star)
    records = [_record(i, final, True, 0.0) for i in range(60)] + [_record(60, 2, False)]
    summary = summarize(records, prediction, config)
    assert summary.survivors == 60
    assert summary.survival_fraction == pytest.approx(60 / 61)
    assert summary.conditional_mean_tau_over_n == pytest.approx(prediction.q_star, abs=1e-3)
    assert summary.conditional_var_standardized == 0.0
    assert summary.ks_distance == pytest.approx(0.5)
    assert summary.chi_square is None


def test_summary_flags_insufficient_survivors():
    config = _config(n=1000)
    records = [_record(i, 800, True, 0.1) for i in range(5)] + [_record(5, 1, False)]
    summary = summarize(records, theory_for(config), config)
    assert summary.insufficient_data
    assert summary.conditional_var_standardized is None
    assert summary.conditional_mean_tau_over_n == pytest.approx(0.8)


def test_summary_against_exact_law():
    config = _config(n=2, p=0.5, law=LawSpec(constant=1), replicas=4000)
    records = run_replicas(config)
    summary = summarize(records, theory_for(config), config)
    assert summary.chi_square is not None
    assert summary.chi_square.p_value > 0.001
    counts = Counter(r.final_informed for r in records)
    assert counts[2] / 4000 == pytest.approx(0.25, abs=0.03)


def test_summarize_needs_records():
    with pytest.raises(ConfigurationError):
        summarize([], theory_for(_config()), _config())


# --- full-size statistical acceptance ---

def _survivor_stats(records, n):
    survivors = [r for r in records if r.survived]
    return survivors, [r.final_informed / n for r in survivors]


@pytest.mark.slow
def test_mode1_law_of_large_numbers():
    config = _config(n=2000, p=0.5, law=LawSpec(constant=4), replicas=400, base_seed=42)
    prediction = theory_for(config)
    epsilon = resolve_epsilon(config, prediction)
    records = run_replicas(config, jobs=4)
    survivors, ratios = _survivor_stats(records, config.n)
    assert len(survivors) / len(records) == pytest.approx(prediction.sigma_star, abs=0.06)
    assert np.mean(ratios) == pytest.approx(prediction.q_star, abs=0.02)
    # extinct runs stay far below the threshold
    assert all(r.final_informed < epsilon * config.n / 4 for r in records if not r.survived)


@pytest.mark.slow
def test_mode1_central_limit():
    config = _config(n=4000, p=0.5, law=LawSpec(constant=4), replicas=600, base_seed=43)
    prediction = theory_for(config)
    records = run_replicas(config, jobs=4)
    standardized = [r.standardized for r in records if r.survived]
    assert len(standardized) >= 500
    assert np.var(standardized, ddof=1) == pytest.approx(prediction.var_star, rel=0.3)
    assert ks_statistic(standardized, prediction.var_star) < ks_critical_value(len(standardized))


@pytest.mark.slow
def test_mode2_limits_do_not_depend_on_p():
    means = []
    for p in (0.4, 0.8):
        config = _config(model="er2", n=2000, p=p, law=LawSpec(constant=2), replicas=400, base_seed=44)
        prediction = theory_for(config)
        records = run_replicas(config, jobs=4)
        survivors, ratios = _survivor_stats(records, config.n)
        assert len(survivors) / len(records) == pytest.approx(prediction.sigma_star, abs=0.06)
        assert np.mean(ratios) == pytest.approx(prediction.q, abs=0.02)
        standardized = [r.standardized for r in survivors]
        assert np.var(standardized, ddof=1) == pytest.approx(prediction.var_star, rel=0.3)
        means.append(mean_and_stderr(ratios))
    (m1, s1), (m2, s2) = means
    assert abs(m1 - m2) < 3 * math.sqrt(s1**2 + s2**2)


@pytest.mark.slow
def test_mode2_coupling_keeps_the_er_marginal():
    summaries = {}
    for model in ("er2", "er2-coupled"):
        config = _config(model=model, n=2000, p=0.5, law=LawSpec(constant=2), replicas=400, base_seed=45)
        prediction = theory_for(config)
        records = run_replicas(config, jobs=4)
        summary = summarize(records, prediction, config, with_oracle=False)
        assert not summary.insufficient_data
        assert summary.conditional_mean_tau_over_n == pytest.approx(prediction.q_star, abs=0.02)
        standardized = [r.standardized for r in records if r.survived]
        assert ks_statistic(standardized, prediction.var_star) < ks_critical_value(len(standardized))
        summaries[model] = summary
    direct, coupled = summaries["er2"], summaries["er2-coupled"]
    gap = abs(direct.conditional_mean_tau_over_n - coupled.conditional_mean_tau_over_n)
    assert gap < 3 * math.sqrt(direct.conditional_mean_stderr**2 + coupled.conditional_mean_stderr**2)
    assert abs(direct.survival_fraction - coupled.survival_fraction) < 0.1

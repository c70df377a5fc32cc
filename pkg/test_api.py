"""
Tests for the API routes and the results store
"""
import asyncio

import pytest
from fastapi import HTTPException

from app import __version__
from app.database import DatabaseManager
from app.models import ExperimentConfig, LawSpec, OracleRequest, SimulateRequest, TheoryRequest
from app.routes import api
from app.services.experiment_service import experiment_service


@pytest.fixture
def store(tmp_path, monkeypatch):
    db = DatabaseManager(str(tmp_path / "runs.db"))
    monkeypatch.setattr(experiment_service, "db", db)
    asyncio.run(db.init_db())
    return db


def _config(**overrides):
    values = dict(model="er1", n=30, p=0.5, law=LawSpec(constant=3), replicas=6, base_seed=11)
    values.update(overrides)
    return ExperimentConfig(**values)


def test_health():
    response = asyncio.run(api.health())
    assert response.success
    assert response.data == {"version": __version__}


def test_theory_artifact_is_flat():
    request = TheoryRequest(law=LawSpec(constant=4), p=0.5, mode=1)
    body = asyncio.run(api.theory(request))
    assert body["q_hat"] == pytest.approx(0.7968121, abs=1e-7)
    assert body["q_star"] == body["q_hat"]
    assert body["config"]["p"] == 0.5
    assert body["version"] == __version__


def test_simulate_is_seeded():
    request = SimulateRequest(model="er2", n=25, p=0.4, law=LawSpec(constant=2), seed=5)
    first = asyncio.run(api.simulate(request))
    second = asyncio.run(api.simulate(request))
    assert first == second
    assert first.trace_header == [] and first.trace_rows == []
    assert "open_edges" in first.extra


def test_simulate_with_trace():
    request = SimulateRequest(model="complete", n=10, law=LawSpec(constant=1), seed=2, trace="summary")
    result = asyncio.run(api.simulate(request))
    assert result.trace_header == ["time", "s", "n_informed"]
    assert len(result.trace_rows) == result.tau + 1


def test_oracle_pmf_keys():
    request = OracleRequest(model="er1", n=2, p=0.5, law=LawSpec(constant=1))
    response = asyncio.run(api.oracle(request))
    assert response.pmf.keys() == {"1", "2"}
    assert response.pmf["2"] == pytest.approx(0.25)

    joint = asyncio.run(api.oracle(OracleRequest(model="complete", n=2, law=LawSpec(constant=1), statistic="joint")))
    assert all("," in key for key in joint.pmf)


def test_oracle_errors_map_to_status_codes():
    infeasible = OracleRequest(model="er2-coupled", n=2, p=0.5, law=LawSpec(constant=1))
    with pytest.raises(HTTPException) as exc:
        asyncio.run(api.oracle(infeasible))
    assert exc.value.status_code == 422

    bad = OracleRequest(model="er1", n=2, p=0.5, law=LawSpec(constant=1), statistic="joint")
    with pytest.raises(HTTPException) as exc:
        asyncio.run(api.oracle(bad))
    assert exc.value.status_code == 400


def test_invalid_epsilon_is_a_bad_request(store):
    with pytest.raises(HTTPException) as exc:
        asyncio.run(api.run_experiment(_config(survival_epsilon=0.95)))
    assert exc.value.status_code == 400


def test_experiment_store_roundtrip(store):
    result = asyncio.run(api.run_experiment(_config()))
    assert result.run_id is not None
    assert len(result.records) == 6

    fetched = asyncio.run(api.get_experiment(result.run_id))
    assert fetched.records == result.records
    assert fetched.config == result.config
    assert fetched.summary == result.summary

    asyncio.run(api.run_experiment(_config(model="complete", replicas=3)))
    listed = asyncio.run(api.list_experiments())
    assert [item.model for item in listed] == ["complete", "er1"]
    only_er1 = asyncio.run(api.list_experiments(model="er1"))
    assert [item.id for item in only_er1] == [result.run_id]
    assert only_er1[0].survival_fraction == result.summary.survival_fraction

    stats = asyncio.run(api.get_stats())
    assert stats.total_runs == 2
    assert stats.total_replicas == 9
    assert stats.runs_by_model == {"complete": 1, "er1": 1}


def test_delete_and_missing_runs(store):
    result = asyncio.run(api.run_experiment(_config(replicas=2)))
    deleted = asyncio.run(api.delete_experiment(result.run_id))
    assert deleted.success

    with pytest.raises(HTTPException) as exc:
        asyncio.run(api.get_experiment(result.run_id))
    assert exc.value.status_code == 404
    with pytest.raises(HTTPException) as exc:
        asyncio.run(api.delete_experiment(result.run_id))
    assert exc.value.status_code == 404

    stats = asyncio.run(api.get_stats())
    assert stats.total_runs == 0 and stats.total_replicas == 0

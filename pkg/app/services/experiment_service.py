"""
Experiment service: replicated runs, summaries, artifacts and the results store
"""
import asyncio
import csv
import json
import logging
from pathlib import Path
from typing import List, Optional

from .. import __version__
from ..core.experiments import RECORD_HEADER, run_replicas, summarize, theory_for
from ..database import db_manager
from ..errors import RumorLabError
from ..models import (
    ExperimentConfig, ExperimentResult, ReplicaRecord, RunListItem,
    SimulateRequest, StoreStatsResponse, Summary,
)
from .simulation_service import simulation_service

logger = logging.getLogger(__name__)


class ExperimentService:
    """Service for Monte Carlo experiments and their persistence"""

    def __init__(self, db=None):
        self.db = db or db_manager

    def run_sync(self, config: ExperimentConfig, jobs: int = 1) -> ExperimentResult:
        records = run_replicas(config, jobs=jobs)
        summary = summarize(records, theory_for(config), config)
        return ExperimentResult(version=__version__, config=config, summary=summary, records=records)

    async def run_experiment(self, config: ExperimentConfig, jobs: int = 1, store: bool = False) -> ExperimentResult:
        """Run all replicas off the event loop, then optionally persist the run"""
        logger.info("experiment %s: n=%d p=%s R=%d", config.model, config.n, config.p, config.replicas)
        try:
            loop = asyncio.get_running_loop()
            result = await loop.run_in_executor(None, self.run_sync, config, jobs)
        except (RumorLabError, ValueError):
            raise
        except Exception as e:
            raise RuntimeError(f"Failed to run experiment: {e}") from e

        if store:
            await self.db.init_db()
            result.run_id = await self.db.save_run(
                config=config.model_dump(mode="json"),
                summary=result.summary.model_dump(mode="json"),
                records=[r.model_dump() for r in result.records],
                version=__version__,
            )
            logger.info("stored run %d", result.run_id)
        return result

    async def get_run(self, run_id: int) -> ExperimentResult:
        run = await self.db.get_run(run_id)
        if not run:
            raise ValueError(f"Run with ID {run_id} not found")
        records = await self.db.get_replicas(run_id)
        return ExperimentResult(
            version=run["version"],
            config=ExperimentConfig(**run["config"]),
            summary=Summary(**run["summary"]),
            records=[ReplicaRecord(**r) for r in records],
            run_id=run["id"],
        )

    async def list_runs(self, model: Optional[str] = None, limit: int = None, offset: int = 0) -> List[RunListItem]:
        runs = await self.db.list_runs(model, limit, offset)
        return [
            RunListItem(
                id=run["id"],
                model=run["model"],
                n=run["n"],
                p=run["p"],
                replicas=run["replicas"],
                survival_fraction=run["summary"].get("survival_fraction"),
                created_at=run["created_at"],
            )
            for run in runs
        ]

    async def delete_run(self, run_id: int) -> bool:
        deleted = await self.db.delete_run(run_id)
        if not deleted:
            raise ValueError(f"Run with ID {run_id} not found")
        return True

    async def get_stats(self) -> StoreStatsResponse:
        return StoreStatsResponse(**await self.db.get_stats())

    def write_replica_traces(self, result: ExperimentResult, directory: str) -> List[str]:
        """Replay every replica from its seed with tracing on and write one CSV per replica"""
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        written = []
        for record in result.records:
            request = SimulateRequest(
                model=result.config.model, n=result.config.n, p=result.config.p,
                law=result.config.law, seed=record.seed, trace=result.config.trace,
            )
            replay = simulation_service.simulate_sync(request)
            path = out / f"replica_{record.replica_id}.csv"
            simulation_service.write_trace(replay, str(path))
            if replay.snapshots:
                simulation_service.write_snapshots(replay, simulation_service.snapshot_path(str(path)))
            written.append(str(path))
        return written

    @staticmethod
    def write_records(records: List[ReplicaRecord], path: str) -> None:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(RECORD_HEADER)
            for r in records:
                writer.writerow([
                    r.replica_id, r.seed, r.tau, r.final_informed,
                    "true" if r.survived else "false",
                    "" if r.standardized is None else repr(r.standardized),
                ])

    @staticmethod
    def summary_json(result: ExperimentResult) -> str:
        """Summary artifact: version, echoed config and summary, without run id or records"""
        payload = result.model_dump(mode="json", exclude={"records", "run_id"})
        return json.dumps(payload, indent=2, sort_keys=True)


# Global service instance
experiment_service = ExperimentService()

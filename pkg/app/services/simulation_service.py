"""
Simulation service: single seeded runs, their trace files and exact small-instance laws
"""
import asyncio
import csv
import json
import logging
from pathlib import Path

from .. import __version__
from ..core.experiments import simulate_once
from ..core.oracle import exact_small_distribution
from ..core.rng_streams import make_source
from ..errors import RumorLabError
from ..models import OracleRequest, OracleResponse, SimulateRequest, SimulationResult

logger = logging.getLogger(__name__)


def _outcome_key(outcome) -> str:
    if isinstance(outcome, tuple):
        return ",".join(str(x) for x in outcome)
    return str(outcome)


class SimulationService:
    """Service for single runs and oracle queries"""

    def simulate_sync(self, request: SimulateRequest) -> SimulationResult:
        law = request.law.to_law()
        src = make_source(request.seed, request.n, request.p, law)
        outcome = simulate_once(request.model, src, request.trace)
        logger.debug("%s run with seed %d: tau=%d", request.model, request.seed, outcome.tau)
        return SimulationResult(
            version=__version__,
            config=request,
            tau=outcome.tau,
            final_informed=outcome.final_informed,
            extra=outcome.extra,
            trace_header=outcome.trace_header if request.trace != "none" else [],
            trace_rows=outcome.trace_rows,
            snapshots=outcome.snapshots,
        )

    async def simulate(self, request: SimulateRequest) -> SimulationResult:
        try:
            loop = asyncio.get_running_loop()
            return await loop.run_in_executor(None, self.simulate_sync, request)
        except (RumorLabError, ValueError):
            raise
        except Exception as e:
            raise RuntimeError(f"Failed to simulate: {e}") from e

    def oracle_sync(self, request: OracleRequest) -> OracleResponse:
        pmf = exact_small_distribution(
            request.model,
            request.n,
            request.p,
            request.law.to_law(),
            depth_cap=request.depth_cap,
            statistic=request.statistic,
        )
        ordered = sorted(pmf.items(), key=lambda item: item[0])
        return OracleResponse(
            version=__version__,
            config=request,
            pmf={_outcome_key(k): w for k, w in ordered},
        )

    async def oracle(self, request: OracleRequest) -> OracleResponse:
        try:
            loop = asyncio.get_running_loop()
            return await loop.run_in_executor(None, self.oracle_sync, request)
        except (RumorLabError, ValueError):
            raise
        except Exception as e:
            raise RuntimeError(f"Failed to enumerate: {e}") from e

    @staticmethod
    def result_line(result: SimulationResult) -> str:
        """One-line summary: tau, final count, then model-specific values"""
        parts = [f"tau={result.tau}", f"final_informed={result.final_informed}"]
        parts.extend(f"{k}={v}" for k, v in sorted(result.extra.items()))
        return " ".join(parts)

    @staticmethod
    def write_trace(result: SimulationResult, path: str) -> None:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(result.trace_header)
            writer.writerows(result.trace_rows)

    @staticmethod
    def write_snapshots(result: SimulationResult, path: str) -> None:
        """Set snapshots as JSON lines, one per step"""
        with open(path, "w") as f:
            for snap in result.snapshots:
                f.write(json.dumps(snap, sort_keys=True) + "\n")

    @staticmethod
    def snapshot_path(trace_path: str) -> str:
        p = Path(trace_path)
        return str(p.with_name(p.stem + ".sets.jsonl"))


# Global service instance
simulation_service = SimulationService()

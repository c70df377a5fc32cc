"""
API routes mirroring the command-line subcommands
"""
from typing import List, Optional

from fastapi import APIRouter, HTTPException

from .. import __version__
from ..errors import RumorLabError
from ..models import (
    APIResponse, ExperimentConfig, ExperimentResult, OracleRequest, OracleResponse,
    RunListItem, SimulateRequest, SimulationResult, StoreStatsResponse, TheoryRequest,
)
from ..services.experiment_service import experiment_service
from ..services.simulation_service import simulation_service
from ..services.theory_service import theory_service

api_router = APIRouter()


def _http_error(e: Exception) -> HTTPException:
    if isinstance(e, ValueError):
        return HTTPException(status_code=400, detail=str(e))
    if isinstance(e, RumorLabError):
        return HTTPException(status_code=422, detail=str(e))
    return HTTPException(status_code=500, detail=str(e))


@api_router.get("/health", response_model=APIResponse)
async def health():
    """Liveness probe"""
    return APIResponse(message="ok", data={"version": __version__})


@api_router.post("/theory")
async def theory(request: TheoryRequest):
    """Flat prediction for a law, edge probability and mode"""
    try:
        prediction = await theory_service.predict(request)
        return theory_service.artifact(request, prediction)
    except Exception as e:
        raise _http_error(e)


@api_router.post("/simulate", response_model=SimulationResult)
async def simulate(request: SimulateRequest):
    """Single seeded run"""
    try:
        return await simulation_service.simulate(request)
    except Exception as e:
        raise _http_error(e)


@api_router.post("/oracle", response_model=OracleResponse)
async def oracle(request: OracleRequest):
    """Exact law of the final informed count on a small instance"""
    try:
        return await simulation_service.oracle(request)
    except Exception as e:
        raise _http_error(e)


@api_router.post("/experiments", response_model=ExperimentResult)
async def run_experiment(config: ExperimentConfig, jobs: int = 1):
    """Run an experiment and store it"""
    try:
        return await experiment_service.run_experiment(config, jobs=jobs, store=True)
    except Exception as e:
        raise _http_error(e)


@api_router.get("/experiments", response_model=List[RunListItem])
async def list_experiments(model: Optional[str] = None, limit: Optional[int] = 20, offset: int = 0):
    """List stored experiments"""
    try:
        return await experiment_service.list_runs(model, limit, offset)
    except Exception as e:
        raise HTTPException(status_code=500, detail=str(e))


@api_router.get("/experiments/{run_id}", response_model=ExperimentResult)
async def get_experiment(run_id: int):
    """A stored experiment with its records"""
    try:
        return await experiment_service.get_run(run_id)
    except ValueError as e:
        raise HTTPException(status_code=404, detail=str(e))
    except Exception as e:
        raise HTTPException(status_code=500, detail=str(e))


@api_router.delete("/experiments/{run_id}", response_model=APIResponse)
async def delete_experiment(run_id: int):
    """Delete a stored experiment"""
    try:
        await experiment_service.delete_run(run_id)
        return APIResponse(message="Run deleted successfully")
    except ValueError as e:
        raise HTTPException(status_code=404, detail=str(e))
    except Exception as e:
        raise HTTPException(status_code=500, detail=str(e))


@api_router.get("/stats", response_model=StoreStatsResponse)
async def get_stats():
    """Results-store statistics"""
    try:
        return await experiment_service.get_stats()
    except Exception as e:
        raise HTTPException(status_code=500, detail=str(e))

"""
Theory service: numerical limits for a resource law and edge probability
"""
import asyncio
from typing import Any, Dict

from .. import __version__
from ..core.theory import predict
from ..errors import RumorLabError
from ..models import TheoryPrediction, TheoryRequest


class TheoryService:
    """Service wrapping the fixed-point and variance solvers"""

    def predict_sync(self, request: TheoryRequest) -> TheoryPrediction:
        return predict(request.law.to_law(), request.p, request.mode)

    async def predict(self, request: TheoryRequest) -> TheoryPrediction:
        """Solve in a worker thread so the event loop stays responsive"""
        try:
            loop = asyncio.get_running_loop()
            return await loop.run_in_executor(None, self.predict_sync, request)
        except (RumorLabError, ValueError):
            raise
        except Exception as e:
            raise RuntimeError(f"Failed to compute prediction: {e}") from e

    def artifact(self, request: TheoryRequest, prediction: TheoryPrediction) -> Dict[str, Any]:
        """Flat prediction plus the resolved request and tool version"""
        return {
            **prediction.model_dump(mode="json"),
            "config": request.model_dump(mode="json"),
            "version": __version__,
        }


# Global service instance
theory_service = TheoryService()

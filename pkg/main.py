"""
Rumor Lab - FastAPI application and command-line entry point
"""
import logging
import sys
from contextlib import asynccontextmanager

from fastapi import FastAPI

from app import __version__
from app.database import db_manager
from app.routes.api import api_router

logger = logging.getLogger(__name__)


@asynccontextmanager
async def lifespan(app: FastAPI):
    """Lifespan event handler for FastAPI"""
    # Initialize the results store on startup
    await db_manager.init_db()
    logger.info("Results store ready at %s", db_manager.db_path)
    yield


# Create FastAPI application
app = FastAPI(
    title="Rumor Lab",
    description="Simulation, theory and exact laws for resource-constrained rumor spreading",
    version=__version__,
    lifespan=lifespan,
)

app.include_router(api_router, prefix="/api", tags=["API"])


def main():
    """Dispatch to the command line; `serve` starts this application"""
    from app.cli import main as cli_main

    sys.exit(cli_main())


if __name__ == "__main__":
    main()

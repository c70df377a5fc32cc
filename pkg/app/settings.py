"""
Environment-driven defaults, loaded once from the process environment and .env
"""
import logging
import os
import sys
from pathlib import Path

from dotenv import load_dotenv

load_dotenv()

PROJECT_ROOT = Path(__file__).parent.parent

DB_PATH = os.getenv("RUMORLAB_DB_PATH", str(PROJECT_ROOT / "rumorlab.db"))
DEFAULT_JOBS = int(os.getenv("RUMORLAB_JOBS", "1"))
LOG_LEVEL = os.getenv("RUMORLAB_LOG_LEVEL", "INFO").upper()
HOST = os.getenv("HOST", "127.0.0.1")
PORT = int(os.getenv("PORT", "8000"))


def configure_logging(level: str | None = None) -> None:
    """Send log records to stderr so stdout stays machine-readable"""
    logging.basicConfig(
        level=(level or LOG_LEVEL).upper(),
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

"""
SQLite results store for experiment runs and their replica records
"""
import json
from typing import Any, Dict, List, Optional

import aiosqlite

from app.settings import DB_PATH

# Database schema
SCHEMA = """
CREATE TABLE IF NOT EXISTS runs (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    model TEXT NOT NULL,
    n INTEGER NOT NULL,
    p REAL NOT NULL,
    replicas INTEGER NOT NULL,
    config TEXT NOT NULL,  -- JSON of the resolved ExperimentConfig
    summary TEXT NOT NULL, -- JSON of the Summary
    version TEXT NOT NULL,
    created_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP
);

CREATE TABLE IF NOT EXISTS replicas (
    run_id INTEGER NOT NULL,
    replica_id INTEGER NOT NULL,
    seed TEXT NOT NULL, -- 64-bit seeds exceed SQLite's signed integers
    tau INTEGER NOT NULL,
    final_informed INTEGER NOT NULL,
    survived INTEGER NOT NULL,
    standardized REAL,
    PRIMARY KEY (run_id, replica_id),
    FOREIGN KEY (run_id) REFERENCES runs (id)
);

CREATE INDEX IF NOT EXISTS idx_runs_model ON runs(model);
CREATE INDEX IF NOT EXISTS idx_runs_created_at ON runs(created_at);
"""


def _run_from_row(row) -> Dict[str, Any]:
    run = dict(row)
    run["config"] = json.loads(run["config"])
    run["summary"] = json.loads(run["summary"])
    return run


class DatabaseManager:
    """Database manager for experiment runs"""

    def __init__(self, db_path: str = None):
        self.db_path = db_path or DB_PATH

    async def init_db(self):
        """Initialize the database with schema"""
        async with aiosqlite.connect(self.db_path) as db:
            await db.executescript(SCHEMA)
            await db.commit()

    async def save_run(self, config: Dict[str, Any], summary: Dict[str, Any],
                       records: List[Dict[str, Any]], version: str) -> int:
        """Store a run with all its replica records and return its ID"""
        async with aiosqlite.connect(self.db_path) as db:
            cursor = await db.execute(
                """INSERT INTO runs (model, n, p, replicas, config, summary, version)
                   VALUES (?, ?, ?, ?, ?, ?, ?)""",
                (config["model"], config["n"], config["p"], config["replicas"],
                 json.dumps(config, sort_keys=True), json.dumps(summary, sort_keys=True), version)
            )
            run_id = cursor.lastrowid
            await db.executemany(
                """INSERT INTO replicas (run_id, replica_id, seed, tau, final_informed, survived, standardized)
                   VALUES (?, ?, ?, ?, ?, ?, ?)""",
                [(run_id, r["replica_id"], str(r["seed"]), r["tau"], r["final_informed"],
                  int(r["survived"]), r["standardized"]) for r in records]
            )
            await db.commit()
            return run_id

    async def get_run(self, run_id: int) -> Optional[Dict[str, Any]]:
        """Get a run by ID"""
        async with aiosqlite.connect(self.db_path) as db:
            db.row_factory = aiosqlite.Row
            cursor = await db.execute("SELECT * FROM runs WHERE id = ?", (run_id,))
            row = await cursor.fetchone()
            return _run_from_row(row) if row else None

    async def list_runs(self, model: str = None, limit: int = None, offset: int = 0) -> List[Dict[str, Any]]:
        """List runs, newest first, with optional model filter and pagination"""
        async with aiosqlite.connect(self.db_path) as db:
            db.row_factory = aiosqlite.Row

            query = "SELECT * FROM runs"
            params = []

            if model:
                query += " WHERE model = ?"
                params.append(model)

            query += " ORDER BY created_at DESC, id DESC"

            if limit:
                query += " LIMIT ? OFFSET ?"
                params.extend([limit, offset])

            cursor = await db.execute(query, params)
            return [_run_from_row(row) for row in await cursor.fetchall()]

    async def get_replicas(self, run_id: int) -> List[Dict[str, Any]]:
        """Replica records of a run, ordered by replica id"""
        async with aiosqlite.connect(self.db_path) as db:
            db.row_factory = aiosqlite.Row
            cursor = await db.execute(
                "SELECT * FROM replicas WHERE run_id = ? ORDER BY replica_id", (run_id,)
            )
            replicas = []
            for row in await cursor.fetchall():
                record = dict(row)
                record["seed"] = int(record["seed"])
                record["survived"] = bool(record["survived"])
                del record["run_id"]
                replicas.append(record)
            return replicas

    async def delete_run(self, run_id: int) -> bool:
        """Delete a run"""
        async with aiosqlite.connect(self.db_path) as db:
            # Delete replica records first
            await db.execute("DELETE FROM replicas WHERE run_id = ?", (run_id,))
            cursor = await db.execute("DELETE FROM runs WHERE id = ?", (run_id,))
            await db.commit()
            return cursor.rowcount > 0

    async def get_stats(self) -> Dict[str, Any]:
        """Get store statistics"""
        async with aiosqlite.connect(self.db_path) as db:
            cursor = await db.execute("SELECT COUNT(*) FROM runs")
            total_runs = (await cursor.fetchone())[0]

            cursor = await db.execute("SELECT COUNT(*) FROM replicas")
            total_replicas = (await cursor.fetchone())[0]

            cursor = await db.execute("SELECT model, COUNT(*) FROM runs GROUP BY model ORDER BY model")
            runs_by_model = {model: count for model, count in await cursor.fetchall()}

            return {
                "total_runs": total_runs,
                "total_replicas": total_replicas,
                "runs_by_model": runs_by_model,
            }


# Global database manager instance
db_manager = DatabaseManager()

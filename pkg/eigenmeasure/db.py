# db.py
import sqlite3
from pathlib import Path
import logging
from contextlib import contextmanager
from typing import Dict, Any, List, Optional
import uuid

from tenacity import retry, retry_if_exception_type, stop_after_attempt, wait_exponential

from .config import STORE_CONFIG

RUN_STATUSES = ('pending', 'running', 'completed', 'error', 'mismatch')

_write_retry = retry(
    retry=retry_if_exception_type(sqlite3.OperationalError),
    stop=stop_after_attempt(STORE_CONFIG['retry_attempts']),
    wait=wait_exponential(multiplier=STORE_CONFIG['retry_min_wait'], max=STORE_CONFIG['retry_max_wait']),
    reraise=True,
)


class RunStore:
    """Record of CLI runs: the families they emitted and the oracle checks they made."""

    def __init__(self, db_path: Path):
        self.db_path = Path(db_path)
        self.db_path.parent.mkdir(parents=True, exist_ok=True)
        self.init_db()

    @contextmanager
    def get_connection(self):
        """Context manager for database connections."""
        conn = sqlite3.connect(str(self.db_path))
        conn.row_factory = sqlite3.Row
        conn.execute("PRAGMA foreign_keys = ON")
        try:
            yield conn
        finally:
            conn.close()

    @_write_retry
    def init_db(self):
        with self.get_connection() as conn:
            cursor = conn.cursor()

            cursor.execute("""
                CREATE TABLE IF NOT EXISTS Runs (
                    id TEXT PRIMARY KEY,
                    created_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP,
                    command TEXT NOT NULL,
                    spec TEXT,
                    status TEXT CHECK(status IN ('pending', 'running', 'completed', 'error', 'mismatch'))
                        DEFAULT 'pending',
                    summary TEXT
                )
            """)

            cursor.execute("""
                CREATE TABLE IF NOT EXISTS Cells (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    run_id TEXT NOT NULL,
                    a_set TEXT NOT NULL,
                    b_set TEXT NOT NULL,
                    constant TEXT NOT NULL,
                    law TEXT NOT NULL,
                    provenance TEXT,
                    FOREIGN KEY (run_id) REFERENCES Runs(id) ON DELETE CASCADE
                )
            """)

            cursor.execute("""
                CREATE TABLE IF NOT EXISTS Checks (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    run_id TEXT NOT NULL,
                    a INTEGER NOT NULL,
                    b INTEGER NOT NULL,
                    expected TEXT NOT NULL,
                    observed TEXT NOT NULL,
                    passed INTEGER NOT NULL,
                    FOREIGN KEY (run_id) REFERENCES Runs(id) ON DELETE CASCADE
                )
            """)

            conn.commit()

    @_write_retry
    def create_run(self, command: str, spec: Optional[str] = None) -> str:
        """Create a new run and return its ID."""
        run_id = str(uuid.uuid4())
        with self.get_connection() as conn:
            conn.execute("INSERT INTO Runs (id, command, spec) VALUES (?, ?, ?)", (run_id, command, spec))
            conn.commit()
        logging.debug(f"Created run {run_id} for {command}")
        return run_id

    @_write_retry
    def add_cells(self, run_id: str, cells: List[Dict[str, str]]) -> int:
        """Store rendered cells (a_set, b_set, constant, law, provenance)."""
        with self.get_connection() as conn:
            conn.executemany("""
                INSERT INTO Cells (run_id, a_set, b_set, constant, law, provenance)
                VALUES (?, ?, ?, ?, ?, ?)
            """, [(run_id, c['a_set'], c['b_set'], c['constant'], c['law'], c.get('provenance'))
                  for c in cells])
            conn.commit()
        return len(cells)

    @_write_retry
    def add_checks(self, run_id: str, checks: List[Dict[str, Any]]) -> int:
        with self.get_connection() as conn:
            conn.executemany("""
                INSERT INTO Checks (run_id, a, b, expected, observed, passed)
                VALUES (?, ?, ?, ?, ?, ?)
            """, [(run_id, c['a'], c['b'], c['expected'], c['observed'], int(c['passed'])) for c in checks])
            conn.commit()
        return len(checks)

    @_write_retry
    def update_run(self, run_id: str, updates: Dict[str, Any]) -> None:
        """Update run information."""
        valid_fields = {'spec', 'summary', 'status'}
        update_fields = {k: v for k, v in updates.items() if k in valid_fields}

        if not update_fields:
            return
        if 'status' in update_fields and update_fields['status'] not in RUN_STATUSES:
            raise ValueError(f"Unknown run status: {update_fields['status']}")

        fields = ', '.join(f'{k} = ?' for k in update_fields.keys())
        values = list(update_fields.values())
        values.append(run_id)

        with self.get_connection() as conn:
            conn.execute(f"UPDATE Runs SET {fields} WHERE id = ?", values)
            conn.commit()

    def get_run_info(self, run_id: str) -> Optional[Dict[str, Any]]:
        """Get a run with its cells and checks."""
        with self.get_connection() as conn:
            cursor = conn.cursor()
            cursor.execute("""
                SELECT id, created_at, command, spec, status, summary
                FROM Runs
                WHERE id = ?
            """, (run_id,))
            run = cursor.fetchone()

            if not run:
                return None

            cursor.execute("""
                SELECT a_set, b_set, constant, law, provenance
                FROM Cells WHERE run_id = ? ORDER BY id ASC
            """, (run_id,))
            cells = cursor.fetchall()
            cursor.execute("""
                SELECT a, b, expected, observed, passed
                FROM Checks WHERE run_id = ? ORDER BY a, b
            """, (run_id,))
            checks = cursor.fetchall()

            run_dict = dict(run)
            run_dict['cells'] = [dict(c) for c in cells]
            run_dict['checks'] = [{**dict(c), 'passed': bool(c['passed'])} for c in checks]
            return run_dict

    def get_all_runs(self) -> List[Dict[str, Any]]:
        """Get all runs, newest first."""
        with self.get_connection() as conn:
            cursor = conn.cursor()
            cursor.execute("""
                SELECT id, created_at, command, status, summary
                FROM Runs
                ORDER BY created_at DESC, rowid DESC
            """)
            return [dict(row) for row in cursor.fetchall()]

    @_write_retry
    def delete_run(self, run_id: str) -> bool:
        """Delete a run with its cells and checks."""
        with self.get_connection() as conn:
            cursor = conn.cursor()
            cursor.execute("DELETE FROM Runs WHERE id = ?", (run_id,))
            conn.commit()
            return cursor.rowcount > 0

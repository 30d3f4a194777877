"""
Database Utilities for datadep
SQLite fetch ledger kept at the root of each store
"""

import os
import sqlite3
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Dict, List, Optional, Sequence

LEDGER_FILENAME = ".datadep-ledger.sqlite"


@dataclass(frozen=True)
class FetchRecord:
    """One downloaded file of one dependency"""

    name: str
    url: str
    filename: str
    byte_count: int
    sha256: str
    attempts: int
    fetched_at: str = ""


class FetchLedger:
    """SQLite record of what was fetched into a store"""

    def __init__(self, db_path: str):
        """
        Initialize ledger

        Args:
            db_path: Path to SQLite database file
        """
        self.db_path = db_path
        self.init_database()

    def _connect(self) -> sqlite3.Connection:
        # several resolver processes may finish at the same time
        return sqlite3.connect(self.db_path, timeout=30)

    def init_database(self):
        """Create tables if they don't exist"""
        conn = self._connect()
        try:
            conn.execute(
                """
                CREATE TABLE IF NOT EXISTS fetches (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    name TEXT NOT NULL,
                    position INTEGER NOT NULL,
                    url TEXT NOT NULL,
                    filename TEXT NOT NULL,
                    byte_count INTEGER NOT NULL,
                    sha256 TEXT NOT NULL,
                    attempts INTEGER NOT NULL,
                    fetched_at TEXT NOT NULL
                )
            """
            )
            conn.execute("CREATE INDEX IF NOT EXISTS fetches_name ON fetches (name)")
            conn.commit()
        finally:
            conn.close()

    def record_fetch(self, name: str, records: Sequence[FetchRecord]) -> None:
        """
        Replace the rows of ``name`` with a new fetch

        Args:
            name: Dependency name
            records: Files in remote-source order
        """
        fetched_at = datetime.now(timezone.utc).isoformat(timespec="seconds")
        conn = self._connect()
        try:
            with conn:
                conn.execute("DELETE FROM fetches WHERE name = ?", (name,))
                conn.executemany(
                    """
                    INSERT INTO fetches
                    (name, position, url, filename, byte_count, sha256, attempts, fetched_at)
                    VALUES (?, ?, ?, ?, ?, ?, ?, ?)
                """,
                    [
                        (
                            name,
                            position,
                            r.url,
                            r.filename,
                            r.byte_count,
                            r.sha256,
                            r.attempts,
                            fetched_at,
                        )
                        for position, r in enumerate(records)
                    ],
                )
        finally:
            conn.close()

    def get_fetches(self, name: str) -> List[FetchRecord]:
        """
        Files recorded for a dependency

        Args:
            name: Dependency name

        Returns:
            Records in remote-source order, empty if never recorded
        """
        conn = self._connect()
        try:
            rows = conn.execute(
                """
                SELECT name, url, filename, byte_count, sha256, attempts, fetched_at
                FROM fetches WHERE name = ? ORDER BY position
            """,
                (name,),
            ).fetchall()
        finally:
            conn.close()
        return [FetchRecord(*row) for row in rows]

    def forget(self, name: str) -> None:
        conn = self._connect()
        try:
            with conn:
                conn.execute("DELETE FROM fetches WHERE name = ?", (name,))
        finally:
            conn.close()

    def get_recent_fetches(self, limit: int = 50) -> List[FetchRecord]:
        """
        Most recently fetched files across all dependencies

        Args:
            limit: Maximum number of rows

        Returns:
            Records, newest first
        """
        conn = self._connect()
        try:
            rows = conn.execute(
                """
                SELECT name, url, filename, byte_count, sha256, attempts, fetched_at
                FROM fetches ORDER BY fetched_at DESC, id DESC LIMIT ?
            """,
                (limit,),
            ).fetchall()
        finally:
            conn.close()
        return [FetchRecord(*row) for row in rows]

    def get_statistics(self) -> Dict[str, int]:
        conn = self._connect()
        try:
            deps, files, total = conn.execute(
                "SELECT COUNT(DISTINCT name), COUNT(*), COALESCE(SUM(byte_count), 0) FROM fetches"
            ).fetchone()
        finally:
            conn.close()
        return {"dependencies": deps, "files": files, "bytes": total}


def ledger_path(store: str) -> str:
    return os.path.join(store, LEDGER_FILENAME)


def get_ledger(store: str, create: bool = True) -> Optional[FetchLedger]:
    """
    Get the ledger of a store

    Args:
        store: Store (or any load-path) directory
        create: Create the database when it does not exist yet

    Returns:
        FetchLedger, or None when absent and ``create`` is False
    """
    path = ledger_path(store)
    if not create and not os.path.isfile(path):
        return None
    return FetchLedger(path)

"""Crash-consistent artifact writes and the SQLite run ledger."""

import logging
import os
import sqlite3
import tempfile
from datetime import datetime, timezone
from pathlib import Path

from tenacity import (
    retry,
    retry_if_exception_type,
    stop_after_attempt,
    wait_exponential,
)

logger = logging.getLogger(__name__)


@retry(
    retry=retry_if_exception_type((PermissionError, BlockingIOError)),
    stop=stop_after_attempt(3),
    wait=wait_exponential(multiplier=0.1, min=0.1, max=1),
    reraise=True,
)
def _replace(source: str, target: Path) -> None:
    os.replace(source, target)


def atomic_write(path: Path, data: bytes) -> None:
    """Write `data` to a sibling temp file, fsync, then rename over `path`.

    Readers see either the old file or the complete new one, never a
    partial write.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
            handle.flush()
            os.fsync(handle.fileno())
        _replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def atomic_write_text(path: Path, text: str) -> None:
    atomic_write(path, text.encode("utf-8"))


class ArtifactLedger:
    """Records which (command, config digest) runs completed, for idempotent re-runs."""

    def __init__(self, db_path: str = "runs.db"):
        self._conn = sqlite3.connect(db_path)
        self._conn.execute(
            """
            CREATE TABLE IF NOT EXISTS completed_runs (
                command TEXT NOT NULL,
                artifact TEXT NOT NULL,
                config_digest TEXT NOT NULL,
                completed_ts TEXT NOT NULL,
                PRIMARY KEY (command, artifact)
            )
            """
        )
        self._conn.commit()

    def is_complete(self, command: str, artifact: str, config_digest: str) -> bool:
        cursor = self._conn.execute(
            "SELECT 1 FROM completed_runs WHERE command = ? AND artifact = ? AND config_digest = ?",
            (command, artifact, config_digest),
        )
        return cursor.fetchone() is not None

    def mark_complete(self, command: str, artifact: str, config_digest: str) -> None:
        """Record a finished run; a later run with another digest replaces it."""
        self._conn.execute(
            "INSERT OR REPLACE INTO completed_runs (command, artifact, config_digest, completed_ts) "
            "VALUES (?, ?, ?, ?)",
            (command, artifact, config_digest, datetime.now(timezone.utc).isoformat()),
        )
        self._conn.commit()

    def count(self) -> int:
        cursor = self._conn.execute("SELECT COUNT(*) FROM completed_runs")
        return cursor.fetchone()[0]

    def close(self) -> None:
        self._conn.close()

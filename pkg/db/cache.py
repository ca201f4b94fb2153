# db/cache.py
# ──────────────────────────────────────────────────────────────
"""
sqlite cache of deterministic (temperature 0) chat responses, keyed by
request hash, so an interrupted evaluation can resume without re-paying
for completed requests.
"""

import json
import sqlite3
import threading
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from db.schema import init_db


# helper – open conn in row-dict mode
def _conn(db_path: str | Path) -> sqlite3.Connection:
    conn = sqlite3.connect(str(db_path))
    conn.row_factory = sqlite3.Row
    return conn


class ResponseCache:
    def __init__(self, db_path: str | Path):
        self.db_path = Path(db_path)
        self._lock = threading.Lock()
        init_db(self.db_path)

    def get(self, request_hash: str) -> Optional[Tuple[str, Optional[Dict[str, Any]]]]:
        with self._lock, _conn(self.db_path) as c:
            row = c.execute(
                "SELECT response_text, usage FROM responses WHERE request_hash = ?",
                (request_hash,),
            ).fetchone()
        if row is None:
            return None
        usage = json.loads(row["usage"]) if row["usage"] else None
        return row["response_text"], usage

    def put(
        self,
        request_hash: str,
        model: str,
        response_text: str,
        usage: Optional[Dict[str, Any]] = None,
    ) -> None:
        ts_now = datetime.now(timezone.utc).isoformat(timespec="seconds")
        with self._lock, _conn(self.db_path) as c:
            c.execute(
                """INSERT OR REPLACE INTO responses
                   (request_hash, model, response_text, usage, ts)
                   VALUES (?, ?, ?, ?, ?)""",
                (request_hash, model, response_text,
                 json.dumps(usage) if usage else None, ts_now),
            )

    def __len__(self) -> int:
        with self._lock, _conn(self.db_path) as c:
            return c.execute("SELECT COUNT(*) FROM responses").fetchone()[0]

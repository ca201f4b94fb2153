# db/schema.py
import sqlite3
from pathlib import Path


def init_db(db_path: str | Path = "cache.sqlite") -> None:
    """Create the response-cache tables if missing."""
    Path(db_path).parent.mkdir(parents=True, exist_ok=True)
    conn = sqlite3.connect(str(db_path))
    cursor = conn.cursor()

    cursor.execute("""
    CREATE TABLE IF NOT EXISTS responses (
                   request_hash  TEXT PRIMARY KEY,
                   model         TEXT,
                   response_text TEXT,
                   usage         TEXT,
                   ts            TEXT
               )
    """)

    conn.commit()
    conn.close()

"""Embedded session store: sqlite persistence, TTL eviction, per-session locks."""

from __future__ import annotations

import json
import sqlite3
import threading
import time
import uuid
from dataclasses import dataclass


@dataclass
class SessionRecord:
    session_id: str
    created_at: float
    turns: list[dict]
    results: list[dict]


class SessionStore:
    """Sessions keyed by id; image bytes and per-turn masks live alongside.

    A path of ':memory:' keeps everything in process; any other path persists
    across restarts. Expired sessions (TTL from last access) are swept on
    every public call.
    """

    def __init__(self, path: str = ":memory:", ttl_s: float = 24 * 3600.0, max_sessions: int = 256):
        self.ttl_s = ttl_s
        self.max_sessions = max_sessions
        self._conn = sqlite3.connect(path, check_same_thread=False)
        self._db_lock = threading.Lock()
        self._turn_locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()
        with self._db_lock:
            self._conn.executescript(
                """
                CREATE TABLE IF NOT EXISTS sessions (
                    session_id TEXT PRIMARY KEY,
                    created_at REAL NOT NULL,
                    last_access REAL NOT NULL,
                    turns TEXT NOT NULL,
                    results TEXT NOT NULL,
                    image BLOB NOT NULL
                );
                CREATE TABLE IF NOT EXISTS masks (
                    session_id TEXT NOT NULL,
                    turn_index INTEGER NOT NULL,
                    png BLOB NOT NULL,
                    PRIMARY KEY (session_id, turn_index)
                );
                """
            )
            self._conn.commit()

    # -- lifecycle ------------------------------------------------------------

    def sweep(self, now: float | None = None):
        now = now if now is not None else time.time()
        cutoff = now - self.ttl_s
        with self._db_lock:
            expired = [r[0] for r in self._conn.execute(
                "SELECT session_id FROM sessions WHERE last_access < ?", (cutoff,)
            )]
            if expired:
                marks = ",".join("?" * len(expired))
                self._conn.execute(f"DELETE FROM sessions WHERE session_id IN ({marks})", expired)
                self._conn.execute(f"DELETE FROM masks WHERE session_id IN ({marks})", expired)
                self._conn.commit()
        with self._locks_guard:
            for sid in expired:
                self._turn_locks.pop(sid, None)

    def count(self) -> int:
        with self._db_lock:
            return int(self._conn.execute("SELECT COUNT(*) FROM sessions").fetchone()[0])

    def create(self, image_png: bytes) -> str:
        self.sweep()
        if self.count() >= self.max_sessions:
            raise RuntimeError(f"session limit reached ({self.max_sessions})")
        session_id = uuid.uuid4().hex
        now = time.time()
        with self._db_lock:
            self._conn.execute(
                "INSERT INTO sessions VALUES (?, ?, ?, ?, ?, ?)",
                (session_id, now, now, "[]", "[]", image_png),
            )
            self._conn.commit()
        return session_id

    # -- access ---------------------------------------------------------------

    def _touch(self, session_id: str):
        with self._db_lock:
            self._conn.execute(
                "UPDATE sessions SET last_access = ? WHERE session_id = ?", (time.time(), session_id)
            )
            self._conn.commit()

    def get(self, session_id: str) -> SessionRecord | None:
        self.sweep()
        with self._db_lock:
            row = self._conn.execute(
                "SELECT created_at, turns, results FROM sessions WHERE session_id = ?", (session_id,)
            ).fetchone()
        if row is None:
            return None
        self._touch(session_id)
        return SessionRecord(
            session_id=session_id,
            created_at=row[0],
            turns=json.loads(row[1]),
            results=json.loads(row[2]),
        )

    def image_png(self, session_id: str) -> bytes | None:
        with self._db_lock:
            row = self._conn.execute(
                "SELECT image FROM sessions WHERE session_id = ?", (session_id,)
            ).fetchone()
        return row[0] if row else None

    def mask_png(self, session_id: str, turn_index: int) -> bytes | None:
        with self._db_lock:
            row = self._conn.execute(
                "SELECT png FROM masks WHERE session_id = ? AND turn_index = ?",
                (session_id, turn_index),
            ).fetchone()
        return row[0] if row else None

    # -- turn processing --------------------------------------------------------

    def turn_lock(self, session_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._turn_locks.setdefault(session_id, threading.Lock())

    def commit_turn(
        self,
        session_id: str,
        user_turn: dict,
        assistant_turn: dict,
        result: dict,
        mask_png: bytes | None,
    ):
        """Append both turns and the turn result atomically."""
        record = self.get(session_id)
        if record is None:
            raise KeyError(session_id)
        turns = record.turns + [user_turn, assistant_turn]
        results = record.results + [result]
        with self._db_lock:
            self._conn.execute(
                "UPDATE sessions SET turns = ?, results = ?, last_access = ? WHERE session_id = ?",
                (json.dumps(turns, ensure_ascii=False), json.dumps(results, ensure_ascii=False), time.time(), session_id),
            )
            if mask_png is not None:
                self._conn.execute(
                    "INSERT OR REPLACE INTO masks VALUES (?, ?, ?)",
                    (session_id, result["turn_index"], mask_png),
                )
            self._conn.commit()

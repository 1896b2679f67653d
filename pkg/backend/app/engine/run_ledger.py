# backend/app/engine/run_ledger.py

"""
Resumable batch ledger (duckdb).

One `run_jobs` row per batch and one `run_items` row per simulation seed, so
an interrupted batch can be re-run and only the missing seeds are played.
"""

from __future__ import annotations

import hashlib
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence, Set

import duckdb

from app.config import CONFIG

JOBS_TABLE = "run_jobs"
ITEMS_TABLE = "run_items"

ItemState = Literal["pending", "running", "succeeded", "failed"]


def _now() -> datetime:
    return datetime.now(timezone.utc).replace(tzinfo=None)


def _get_conn(db_path: Optional[str] = None) -> duckdb.DuckDBPyConnection:
    path = db_path or CONFIG.duckdb_path
    if path != ":memory:":
        Path(path).parent.mkdir(parents=True, exist_ok=True)
    return duckdb.connect(path)


def _ensure_schema(db_path: Optional[str] = None) -> None:
    con = _get_conn(db_path)
    try:
        con.execute(
            f"""
            CREATE TABLE IF NOT EXISTS {JOBS_TABLE} (
                id TEXT PRIMARY KEY,
                created_at TIMESTAMP NOT NULL,
                finished_at TIMESTAMP,
                state TEXT NOT NULL, -- 'running' | 'succeeded' | 'failed'

                config_digest TEXT NOT NULL,
                out_dir TEXT NOT NULL,
                sims_requested INTEGER NOT NULL,
                sims_succeeded INTEGER NOT NULL,
                sims_failed INTEGER NOT NULL,

                last_error TEXT
            )
            """
        )
        con.execute(
            f"""
            CREATE TABLE IF NOT EXISTS {ITEMS_TABLE} (
                job_id TEXT NOT NULL,
                seed BIGINT NOT NULL,

                state TEXT NOT NULL, -- 'pending' | 'running' | 'succeeded' | 'failed'
                attempts INTEGER NOT NULL,
                last_error TEXT,

                updated_at TIMESTAMP NOT NULL,

                PRIMARY KEY (job_id, seed)
            )
            """
        )
    finally:
        con.close()


def config_digest(config_text: str) -> str:
    return hashlib.sha256(config_text.encode("utf-8")).hexdigest()


def job_id_for(digest: str, out_dir: Path | str) -> str:
    """Same config + same output directory -> same job, which is what makes resume work."""
    key = f"{digest}|{Path(out_dir).resolve()}"
    return hashlib.sha256(key.encode("utf-8")).hexdigest()[:16]


# -------------------------
# Jobs
# -------------------------


def open_job(
    *,
    digest: str,
    out_dir: Path | str,
    seeds: Sequence[int],
    db_path: Optional[str] = None,
) -> str:
    """Create the job (or reopen it for resume) and make sure every seed has an item."""
    _ensure_schema(db_path)
    job_id = job_id_for(digest, out_dir)
    now = _now()

    con = _get_conn(db_path)
    try:
        con.execute("BEGIN")
        con.execute(
            f"""
            INSERT OR IGNORE INTO {JOBS_TABLE} (
                id, created_at, finished_at, state, config_digest, out_dir,
                sims_requested, sims_succeeded, sims_failed, last_error
            )
            VALUES (?, ?, NULL, 'running', ?, ?, ?, 0, 0, NULL)
            """,
            [job_id, now, digest, str(out_dir), len(seeds)],
        )
        con.execute(
            f"UPDATE {JOBS_TABLE} SET state = 'running', finished_at = NULL, sims_requested = ? WHERE id = ?",
            [len(seeds), job_id],
        )
        con.executemany(
            f"""
            INSERT OR IGNORE INTO {ITEMS_TABLE}
                (job_id, seed, state, attempts, last_error, updated_at)
            VALUES (?, ?, 'pending', 0, NULL, ?)
            """,
            [(job_id, int(s), now) for s in seeds],
        )
        con.execute("COMMIT")
    except Exception:
        try:
            con.execute("ROLLBACK")
        except Exception:
            pass
        raise
    finally:
        con.close()

    return job_id


def finish_job(job_id: str, *, last_error: Optional[str] = None, db_path: Optional[str] = None) -> Dict[str, Any]:
    """Recount items, set the final state and return the job row."""
    _ensure_schema(db_path)
    counts = item_counts(job_id, db_path=db_path)
    state = "failed" if counts.get("failed", 0) else "succeeded"

    con = _get_conn(db_path)
    try:
        con.execute(
            f"""
            UPDATE {JOBS_TABLE}
            SET finished_at = ?, state = ?, sims_succeeded = ?, sims_failed = ?, last_error = ?
            WHERE id = ?
            """,
            [_now(), state, counts.get("succeeded", 0), counts.get("failed", 0), last_error, job_id],
        )
    finally:
        con.close()

    job = get_job(job_id, db_path=db_path)
    assert job is not None
    return job


def get_job(job_id: str, *, db_path: Optional[str] = None) -> Optional[Dict[str, Any]]:
    _ensure_schema(db_path)
    con = _get_conn(db_path)
    try:
        row = con.execute(
            f"""
            SELECT id, created_at, finished_at, state, config_digest, out_dir,
                   sims_requested, sims_succeeded, sims_failed, last_error
            FROM {JOBS_TABLE}
            WHERE id = ?
            """,
            [job_id],
        ).fetchone()
    finally:
        con.close()

    if row is None:
        return None

    (id_, created_at, finished_at, state, digest, out_dir, requested, succeeded, failed, err) = row

    def _iso(dt):
        return dt.isoformat() if dt is not None else None

    return {
        "id": id_,
        "created_at": _iso(created_at),
        "finished_at": _iso(finished_at),
        "state": state,
        "config_digest": digest,
        "out_dir": out_dir,
        "sims_requested": int(requested),
        "sims_succeeded": int(succeeded),
        "sims_failed": int(failed),
        "last_error": err,
    }


# -------------------------
# Items
# -------------------------


def set_item_state(
    job_id: str,
    seed: int,
    *,
    state: ItemState,
    last_error: Optional[str] = None,
    bump_attempts: bool = False,
    db_path: Optional[str] = None,
) -> None:
    _ensure_schema(db_path)
    con = _get_conn(db_path)
    try:
        con.execute(
            f"""
            UPDATE {ITEMS_TABLE}
            SET state = ?,
                last_error = ?,
                attempts = attempts + ?,
                updated_at = ?
            WHERE job_id = ? AND seed = ?
            """,
            [state, last_error, 1 if bump_attempts else 0, _now(), job_id, int(seed)],
        )
    finally:
        con.close()


def succeeded_seeds(job_id: str, *, db_path: Optional[str] = None) -> Set[int]:
    _ensure_schema(db_path)
    con = _get_conn(db_path)
    try:
        rows = con.execute(
            f"SELECT seed FROM {ITEMS_TABLE} WHERE job_id = ? AND state = 'succeeded'",
            [job_id],
        ).fetchall()
    finally:
        con.close()
    return {int(r[0]) for r in rows}


def item_counts(job_id: str, *, db_path: Optional[str] = None) -> Dict[str, int]:
    _ensure_schema(db_path)
    con = _get_conn(db_path)
    try:
        rows = con.execute(
            f"SELECT state, COUNT(*) FROM {ITEMS_TABLE} WHERE job_id = ? GROUP BY state",
            [job_id],
        ).fetchall()
    finally:
        con.close()
    return {str(state): int(n) for state, n in rows}


def list_items(job_id: str, *, db_path: Optional[str] = None) -> List[Dict[str, Any]]:
    _ensure_schema(db_path)
    con = _get_conn(db_path)
    try:
        rows = con.execute(
            f"""
            SELECT seed, state, attempts, last_error
            FROM {ITEMS_TABLE}
            WHERE job_id = ?
            ORDER BY seed
            """,
            [job_id],
        ).fetchall()
    finally:
        con.close()
    return [
        {"seed": int(s), "state": st, "attempts": int(a), "last_error": e} for s, st, a, e in rows
    ]

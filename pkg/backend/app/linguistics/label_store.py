# backend/app/linguistics/label_store.py

"""
Dialogue-act label cache (duckdb).

Labels are keyed by (simulation_id, round, agent) so re-running an analysis
never asks the labeler twice for the same message.
"""

from __future__ import annotations

from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, Optional

import duckdb

from app.config import CONFIG
from app.linguistics.dialogue_acts import (
    DialogueAct,
    LabeledMessage,
    acts_from_text,
    acts_to_text,
)

LABELS_TABLE = "dialogue_act_labels"


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
            CREATE TABLE IF NOT EXISTS {LABELS_TABLE} (
                simulation_id TEXT NOT NULL,
                round INTEGER NOT NULL,
                agent INTEGER NOT NULL,

                acts TEXT NOT NULL, -- sorted, comma-joined
                labeler TEXT NOT NULL,
                labeled_at TIMESTAMP NOT NULL,

                PRIMARY KEY (simulation_id, round, agent)
            )
            """
        )
    finally:
        con.close()


def cached_labels(
    simulation_id: str,
    *,
    labeler: Optional[str] = None,
    db_path: Optional[str] = None,
) -> Dict[tuple[int, int], FrozenSet[DialogueAct]]:
    """(round, agent) -> acts for one simulation, optionally for one labeler only."""
    _ensure_schema(db_path)
    sql = f"SELECT round, agent, acts FROM {LABELS_TABLE} WHERE simulation_id = ?"
    params = [simulation_id]
    if labeler is not None:
        sql += " AND labeler = ?"
        params.append(labeler)

    con = _get_conn(db_path)
    try:
        rows = con.execute(sql, params).fetchall()
    finally:
        con.close()
    return {(int(r), int(a)): acts_from_text(acts) for r, a, acts in rows}


def store_labels(
    labels: Iterable[LabeledMessage],
    *,
    labeler: str,
    db_path: Optional[str] = None,
) -> int:
    rows = [
        (m.simulation_id, m.round, m.agent, acts_to_text(m.acts), labeler)
        for m in labels
    ]
    if not rows:
        return 0

    _ensure_schema(db_path)
    now = datetime.now(timezone.utc).replace(tzinfo=None)
    con = _get_conn(db_path)
    try:
        con.execute("BEGIN")
        con.executemany(
            f"""
            INSERT OR REPLACE INTO {LABELS_TABLE}
                (simulation_id, round, agent, acts, labeler, labeled_at)
            VALUES (?, ?, ?, ?, ?, ?)
            """,
            [(*row, now) for row in rows],
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
    return len(rows)

# backend/app/scripts/analyze.py

"""
Linguistic analysis of a finished batch.

Writes, under <out>/analysis/:
  - features.csv      per-round length, readability and information difference
  - act_ratios.csv    per-round share of messages carrying each dialogue act
  - transitions.csv   full dialogue-act transition edge list
  - transitions.dot   most probable outgoing edge per act, self-loops excluded

Dialogue-act labels are cached in duckdb so a re-run never relabels a message.
"""

from __future__ import annotations

import hashlib
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import pandas as pd

from app.engine.transcript_store import load_transcripts
from app.engine.types import Transcript
from app.linguistics.dialogue_acts import LabeledMessage, Labeler, label_transcript
from app.linguistics.embeddings import Embedder
from app.linguistics.features import RoundFeatures, features_frame, round_features
from app.linguistics.label_store import cached_labels, store_labels
from app.linguistics.readability import LinguisticsError
from app.linguistics.transitions import (
    Counting,
    LabeledSimulation,
    act_ratios,
    edges_frame,
    to_dot,
    transition_graph,
)

logger = logging.getLogger(__name__)

ANALYSIS_DIR = "analysis"
FEATURES_FILE = "features.csv"
ACT_RATIOS_FILE = "act_ratios.csv"
TRANSITIONS_CSV = "transitions.csv"
TRANSITIONS_DOT = "transitions.dot"


def label_key(transcript: Transcript) -> str:
    """Cache key: simulation id qualified by a digest of the transcript content."""
    digest = hashlib.sha256(transcript.model_dump_json().encode("utf-8")).hexdigest()[:16]
    return f"{transcript.simulation_id}@{digest}"


async def labeled_simulation(
    transcript: Transcript,
    labeler: Labeler,
    *,
    db_path: Optional[str] = None,
) -> LabeledSimulation:
    key = label_key(transcript)
    cached = cached_labels(key, labeler=labeler.labeler_id, db_path=db_path)
    labels = await label_transcript(transcript, labeler, cached)
    fresh = [m for m in labels if (m.round, m.agent) not in cached]
    if fresh:
        store_labels(
            [m.model_copy(update={"simulation_id": key}) for m in fresh],
            labeler=labeler.labeler_id,
            db_path=db_path,
        )
        logger.info("%s: labeled %s new messages", transcript.simulation_id, len(fresh))
    return LabeledSimulation.from_transcript(transcript, labels)


def cached_simulation(
    transcript: Transcript, *, labeler_id: Optional[str] = None, db_path: Optional[str] = None
) -> LabeledSimulation:
    """Labels from the cache only; raises LinguisticsError when the batch was never analyzed."""
    cached = cached_labels(label_key(transcript), labeler=labeler_id, db_path=db_path)
    labels = [
        LabeledMessage(simulation_id=transcript.simulation_id, round=r, agent=a, acts=acts)
        for (r, a), acts in cached.items()
    ]
    try:
        return LabeledSimulation.from_transcript(transcript, labels)
    except LinguisticsError as e:
        raise LinguisticsError(f"{e}; run the analyze command on this batch first") from None


def read_info_differences(out_dir: Path | str) -> Dict[str, List[Optional[float]]]:
    """simulation_id -> info difference by round, from a previous analyze run."""
    path = Path(out_dir) / ANALYSIS_DIR / FEATURES_FILE
    if not path.exists():
        raise LinguisticsError(f"{path} not found; run the analyze command on this batch first")
    frame = pd.read_csv(path)
    out: Dict[str, List[Optional[float]]] = {}
    for sim_id, group in frame.sort_values(["simulation_id", "round"]).groupby("simulation_id"):
        out[str(sim_id)] = [None if pd.isna(v) else float(v) for v in group["info_difference"]]
    return out


async def analyze(
    out_dir: Path | str,
    *,
    embedder: Embedder,
    labeler: Labeler,
    counting: Counting = "pairs",
    db_path: Optional[str] = None,
    transcripts: Optional[Sequence[Transcript]] = None,
) -> Dict[str, Path]:
    out_dir = Path(out_dir)
    transcripts = list(transcripts) if transcripts is not None else load_transcripts(out_dir)
    if not transcripts:
        raise LinguisticsError(f"no transcripts found under {out_dir}")

    features: List[RoundFeatures] = []
    simulations: List[LabeledSimulation] = []
    for t in transcripts:
        features.extend(await round_features(t, embedder))
        simulations.append(await labeled_simulation(t, labeler, db_path=db_path))
        print(f"[analyze] {t.simulation_id} done", flush=True)

    graph = transition_graph(simulations, counting=counting)

    target = out_dir / ANALYSIS_DIR
    target.mkdir(parents=True, exist_ok=True)
    paths = {
        "features": target / FEATURES_FILE,
        "act_ratios": target / ACT_RATIOS_FILE,
        "transitions_csv": target / TRANSITIONS_CSV,
        "transitions_dot": target / TRANSITIONS_DOT,
    }
    features_frame(features).to_csv(paths["features"], index=False)
    act_ratios(simulations).to_csv(paths["act_ratios"], index=False)
    edges_frame(graph).to_csv(paths["transitions_csv"], index=False)
    paths["transitions_dot"].write_text(to_dot(graph), encoding="utf-8")

    print(f"[analyze] wrote {len(paths)} exports to {target}", flush=True)
    return paths

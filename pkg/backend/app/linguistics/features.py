# backend/app/linguistics/features.py

from __future__ import annotations

from typing import List, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict

from app.engine.types import Message, Transcript
from app.linguistics.embeddings import Embedder, info_difference
from app.linguistics.readability import fk_grade, word_count


class RoundFeatures(BaseModel):
    model_config = ConfigDict(frozen=True)

    simulation_id: str
    round: int
    messages: int
    mean_words: Optional[float] = None
    mean_fk_grade: Optional[float] = None
    info_difference: Optional[float] = None


def _spoken(messages: Sequence[Message]) -> List[str]:
    # degraded messages carry no language
    return [m.text for m in messages if not m.skipped and m.text.strip()]


async def round_features(transcript: Transcript, embedder: Embedder) -> List[RoundFeatures]:
    out: List[RoundFeatures] = []
    previous: Optional[np.ndarray] = None
    for record in transcript.rounds:
        texts = _spoken(record.messages)
        vectors = await embedder.embed(texts) if texts else None
        diff = info_difference(vectors, previous) if vectors is not None else None
        out.append(
            RoundFeatures(
                simulation_id=transcript.simulation_id,
                round=record.round,
                messages=len(texts),
                mean_words=float(np.mean([word_count(t) for t in texts])) if texts else None,
                mean_fk_grade=float(np.mean([fk_grade(t) for t in texts])) if texts else None,
                info_difference=diff,
            )
        )
        previous = vectors
    return out


def features_frame(rows: Sequence[RoundFeatures]) -> pd.DataFrame:
    columns = list(RoundFeatures.model_fields)
    return pd.DataFrame([r.model_dump() for r in rows], columns=columns)


def info_difference_series(rows: Sequence[RoundFeatures]) -> List[Optional[float]]:
    """Info difference by round, index 0 is round 1."""
    return [r.info_difference for r in sorted(rows, key=lambda r: r.round)]

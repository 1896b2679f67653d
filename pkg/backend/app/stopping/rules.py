# backend/app/stopping/rules.py

"""
Early-stopping rules.

Every rule is total: when it never fires it falls back to the final round R
with `triggered = False`.
"""

from __future__ import annotations

import math
from typing import List, Optional, Sequence

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.engine.types import Transcript
from app.stopping.series import PerformanceSeries, StoppingError


class StopDecision(BaseModel):
    model_config = ConfigDict(frozen=True)

    simulation_id: str
    stopped_round: int = Field(ge=1)
    rounds: int = Field(ge=1)
    triggered: bool

    @model_validator(mode="after")
    def _fallback_is_final(self) -> "StopDecision":
        if self.stopped_round > self.rounds:
            raise ValueError(f"stopped_round {self.stopped_round} > R = {self.rounds}")
        if not self.triggered and self.stopped_round != self.rounds:
            raise ValueError("an untriggered rule must stop at the final round")
        return self

    @property
    def early(self) -> bool:
        """Stopped before the final round (what the effective ratio counts)."""
        return self.stopped_round < self.rounds


def untriggered(simulation_id: str, rounds: int) -> StopDecision:
    return StopDecision(
        simulation_id=simulation_id, stopped_round=rounds, rounds=rounds, triggered=False
    )


def stop_at(simulation_id: str, round_num: int, rounds: int) -> StopDecision:
    return StopDecision(
        simulation_id=simulation_id, stopped_round=round_num, rounds=rounds, triggered=True
    )


def oracle_round(series: PerformanceSeries) -> int:
    """Best round under the series direction; earliest on ties."""
    best = 1
    for r in range(2, series.rounds + 1):
        if series.better(series.at(r), series.at(best)):
            best = r
    return best


def oracle_decision(series: PerformanceSeries) -> StopDecision:
    return stop_at(series.simulation_id, oracle_round(series), series.rounds)


def final_round_decision(series: PerformanceSeries) -> StopDecision:
    return untriggered(series.simulation_id, series.rounds)


def first_agreement(transcript: Transcript) -> StopDecision:
    """Stop at the first round whose vote selected a proposal."""
    rounds = transcript.config.rounds
    for record in transcript.rounds:
        if record.selected:
            return stop_at(transcript.simulation_id, record.round, rounds)
    return untriggered(transcript.simulation_id, rounds)


def consecutive_agreements(transcript: Transcript) -> StopDecision:
    """
    Stop at the first round r >= 2 where round r-1 selected a proposal and no
    agent put forward a new proposal in round r.
    """
    rounds = transcript.config.rounds
    records = sorted(transcript.rounds, key=lambda rec: rec.round)
    for prev, cur in zip(records, records[1:]):
        if prev.selected and not cur.any_new_proposal:
            return stop_at(transcript.simulation_id, cur.round, rounds)
    return untriggered(transcript.simulation_id, rounds)


def validation_checkpoint(train: Sequence[PerformanceSeries]) -> int:
    """Mean oracle round of the training simulations, rounded half-up, clipped to [1, R]."""
    if not train:
        raise StoppingError("validation checkpoint needs at least one training simulation")
    rounds = max(s.rounds for s in train)
    mean = sum(oracle_round(s) for s in train) / len(train)
    return min(rounds, max(1, math.floor(mean + 0.5)))


def checkpoint_decision(simulation_id: str, checkpoint: int, rounds: int) -> StopDecision:
    if checkpoint >= rounds:
        return untriggered(simulation_id, rounds)
    return stop_at(simulation_id, checkpoint, rounds)


def info_diff_threshold(
    train: Sequence[PerformanceSeries],
    info: Sequence[Sequence[Optional[float]]],
) -> float:
    """
    Mean information difference observed at each training simulation's oracle
    round. Simulations whose oracle round has no value (round 1, or a silent
    round) are left out.
    """
    if len(train) != len(info):
        raise StoppingError(f"{len(train)} series but {len(info)} info-difference rows")
    picked: List[float] = []
    for series, row in zip(train, info):
        r = oracle_round(series)
        value = row[r - 1] if r - 1 < len(row) else None
        if value is not None:
            picked.append(value)
    if not picked:
        raise StoppingError(
            "information-difference threshold undefined: no training simulation peaks after round 1"
        )
    return math.fsum(picked) / len(picked)


def info_diff_rule(
    simulation_id: str,
    info: Sequence[Optional[float]],
    threshold: float,
    rounds: Optional[int] = None,
) -> StopDecision:
    """Stop at the first round r >= 2 whose information difference is strictly below threshold."""
    rounds = rounds or len(info)
    for r in range(2, rounds + 1):
        value = info[r - 1] if r - 1 < len(info) else None
        if value is not None and value < threshold:
            return stop_at(simulation_id, r, rounds)
    return untriggered(simulation_id, rounds)

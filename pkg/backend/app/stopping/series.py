# backend/app/stopping/series.py

from __future__ import annotations

from typing import List, Literal, Optional, Sequence

from pydantic import BaseModel, ConfigDict, Field

from app.engine.types import Transcript
from app.environments.econ_metrics import econ_metrics
from app.environments.economy import EconomyEnvironment
from app.environments.recommendation import ALWAYS_GUESS, standing_ratings

Direction = Literal["higher", "lower"]


class StoppingError(Exception):
    """A stopping rule or its evaluation cannot be computed on the given input."""

    pass


class PerformanceSeries(BaseModel):
    """Per-round performance of one simulation. Index 0 is round 1."""

    model_config = ConfigDict(frozen=True)

    simulation_id: str
    values: List[float] = Field(min_length=1)
    direction: Direction = "higher"

    @property
    def rounds(self) -> int:
        return len(self.values)

    def at(self, round_num: int) -> float:
        if not 1 <= round_num <= self.rounds:
            raise StoppingError(f"round {round_num} outside 1..{self.rounds}")
        return self.values[round_num - 1]

    def better(self, a: float, b: float) -> bool:
        """True when `a` is strictly better than `b` under this direction."""
        return a > b if self.direction == "higher" else a < b


def economy_series(
    transcript: Transcript, env: EconomyEnvironment, u_max: float
) -> PerformanceSeries:
    """Normalized group utility U_r of the standing allocation, higher is better."""
    metrics = econ_metrics(transcript, env, u_max)
    return PerformanceSeries(
        simulation_id=transcript.simulation_id, values=metrics.u_series, direction="higher"
    )


def recommendation_series(transcript: Transcript, gold: float) -> PerformanceSeries:
    """
    Absolute error of the standing rating per round, lower is better; averaging
    these across simulations at the stopped rounds gives MAE.
    """
    values = [
        abs((ALWAYS_GUESS if r is None else r) - gold) for r in standing_ratings(transcript)
    ]
    return PerformanceSeries(
        simulation_id=transcript.simulation_id, values=values, direction="lower"
    )


def mean_performance(series: Sequence[PerformanceSeries], rounds: Sequence[int]) -> float:
    if not series:
        raise StoppingError("no simulations to average")
    return sum(s.at(r) for s, r in zip(series, rounds)) / len(series)


def final_round(series: Sequence[PerformanceSeries]) -> Optional[int]:
    lengths = {s.rounds for s in series}
    if len(lengths) > 1:
        raise StoppingError(f"series lengths differ: {sorted(lengths)}")
    return lengths.pop() if lengths else None

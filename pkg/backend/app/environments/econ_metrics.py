# backend/app/environments/econ_metrics.py

from __future__ import annotations

import math
from typing import Dict, List, Optional, Sequence

from pydantic import BaseModel, ConfigDict

from app.engine.types import Transcript
from app.environments.economy import EconomyEnvironment

AUC_POINTS = (3, 5, 10)
# U_r == U_{r-1} comparison for rigidity
RIGIDITY_ABS_TOL = 1e-12


class EconMetrics(BaseModel):
    model_config = ConfigDict(frozen=True)

    u_max: float
    u_series: List[float]  # normalized U_r, r = 1..R
    u_initial: float  # normalized U_0 from the endowment
    auc: Dict[int, float]
    minmax: float
    rationality: float
    proposal_events: int
    rigidity: float

    def u_at(self, round_num: int) -> float:
        return self.u_series[round_num - 1]


def auc_at(series: Sequence[float], n: int) -> float:
    """AUC@n = sum of the first n normalized values."""
    if n < 1 or n > len(series):
        raise ValueError(f"AUC@{n} needs at least {n} rounds, series has {len(series)}")
    return float(math.fsum(series[:n]))


def rigidity_of(series: Sequence[float], initial: float) -> float:
    """Fraction of rounds whose U_r equals U_{r-1} (U_0 = endowment)."""
    prev = initial
    same = 0
    for value in series:
        same += int(math.isclose(value, prev, rel_tol=0.0, abs_tol=RIGIDITY_ABS_TOL))
        prev = value
    return same / len(series)


def minmax_of(utilities: Sequence[float]) -> float:
    if not utilities or max(utilities) <= 0:
        return 0.0
    low = min(utilities)
    if low <= 0:
        return 0.0
    return low / max(utilities)


def econ_metrics(
    transcript: Transcript,
    env: EconomyEnvironment,
    u_max: Optional[float],
) -> EconMetrics:
    """
    Quality (U_r, AUC@n), fairness (min/max), rationality and rigidity of one
    economy transcript. The standing allocation before any acceptance is the
    environment's endowment.
    """
    if u_max is None:
        raise ValueError("econ_metrics needs U_max; compute it with welfare.u_max first")
    if u_max <= 0:
        raise ValueError(f"U_max must be positive, got {u_max}")

    rounds = transcript.config.rounds

    def standing_body(r: int):
        p = transcript.standing_after(r)
        return None if p is None else p.body

    u_initial = env.group_total(None) / u_max
    series = [env.group_total(standing_body(r)) / u_max for r in range(1, rounds + 1)]

    auc = {n: auc_at(series, n) for n in AUC_POINTS if n <= rounds}

    final_utils = env.individual_utilities(standing_body(rounds))
    minmax = minmax_of(final_utils)

    events = 0
    rational = 0
    for record in transcript.rounds:
        before = standing_body(record.round - 1)
        for agent, proposal in sorted(record.new_proposals.items()):
            if proposal is None:
                continue
            events += 1
            if env.utility(agent, proposal.body) > env.own_utility(agent, before):
                rational += 1

    return EconMetrics(
        u_max=u_max,
        u_series=series,
        u_initial=u_initial,
        auc=auc,
        minmax=minmax,
        rationality=(rational / events) if events else 0.0,
        proposal_events=events,
        rigidity=rigidity_of(series, u_initial),
    )

# backend/app/stopping/dialogue_act_rule.py

"""
Dialogue-act stopping rule.

Every ordered pair (A, B) with A in some agent's message at round r-1 and B in
another agent's message at round r is a binary feature of round r. An OLS
fit of round performance on those indicators ranks the pairs; a greedy grid
search on the training simulations picks how many pairs to watch and how
many of them must fire in a round before the collaboration stops.
"""

from __future__ import annotations

import itertools
import logging
from collections import Counter
from typing import Dict, Iterator, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.linguistics.dialogue_acts import CONTENT_ACTS, DialogueAct
from app.linguistics.transitions import LabeledSimulation
from app.stopping.ols import OLSError, OLSResult, ols_fit
from app.stopping.rules import StopDecision, stop_at, untriggered
from app.stopping.series import PerformanceSeries, StoppingError

logger = logging.getLogger(__name__)

TOP_DA_RANGE = range(1, 6)
P_VALUE_THRESHOLDS: Tuple[Optional[float], ...] = (0.05, 0.1, 0.2, None)
COUNT_PER_ROUND_RANGE = range(1, 4)
INTERCEPT = "const"

Pair = Tuple[DialogueAct, DialogueAct]
Ranking = Literal["signed", "absolute"]
Target = Literal["round", "final"]

ALL_PAIRS: Tuple[Pair, ...] = tuple(itertools.product(CONTENT_ACTS, CONTENT_ACTS))


def pair_name(pair: Pair) -> str:
    return f"{pair[0].value}->{pair[1].value}"


class DAFeatureRow(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    simulation_id: str
    round: int = Field(ge=2)
    # (A, B) -> number of (i, j != i) agent pairs realizing it
    counts: Dict[Pair, int]
    performance: float

    def indicator(self, pair: Pair) -> int:
        return 1 if self.counts.get(pair, 0) > 0 else 0


class DAHyperParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    top_da: int = Field(ge=1, le=5)
    p_value_threshold: Optional[float] = None
    count_per_round: int = Field(ge=1, le=3)
    score_threshold: int = Field(ge=1)

    @model_validator(mode="after")
    def _in_grid(self) -> "DAHyperParams":
        if self.p_value_threshold not in P_VALUE_THRESHOLDS:
            raise ValueError(f"p_value_threshold must be one of {P_VALUE_THRESHOLDS}")
        if self.score_threshold > self.top_da:
            raise ValueError("score_threshold cannot exceed top_da")
        return self


def hyperparameter_grid() -> Iterator[DAHyperParams]:
    for top_da in TOP_DA_RANGE:
        for p in P_VALUE_THRESHOLDS:
            for count in COUNT_PER_ROUND_RANGE:
                for score in range(1, top_da + 1):
                    yield DAHyperParams(
                        top_da=top_da,
                        p_value_threshold=p,
                        count_per_round=count,
                        score_threshold=score,
                    )


def round_pair_counts(sim: LabeledSimulation, round_num: int) -> Dict[Pair, int]:
    """Counts of (i, j != i) agent pairs with A at round-1 for i and B at round for j."""
    counts: Counter = Counter()
    for i in range(sim.agents):
        before = sim.acts_at(round_num - 1, i)
        for j in range(sim.agents):
            if j == i:
                continue
            for a in before:
                for b in sim.acts_at(round_num, j):
                    counts[(a, b)] += 1
    return dict(counts)


def da_pair_features(
    sim: LabeledSimulation,
    series: PerformanceSeries,
    *,
    target: Target = "round",
) -> List[DAFeatureRow]:
    """One row per round 2..R; the response is performance at that round (or the final one)."""
    if series.rounds != sim.rounds:
        raise StoppingError(
            f"{sim.simulation_id}: {sim.rounds} labeled rounds but {series.rounds} performance values"
        )
    rows = []
    for r in range(2, sim.rounds + 1):
        rows.append(
            DAFeatureRow(
                simulation_id=sim.simulation_id,
                round=r,
                counts=round_pair_counts(sim, r),
                performance=series.at(r) if target == "round" else series.at(series.rounds),
            )
        )
    return rows


def fit_pairs(rows: Sequence[DAFeatureRow]) -> Tuple[OLSResult, List[Pair]]:
    """OLS of performance on an intercept plus every pair indicator that varies across rows."""
    varying = [
        pair
        for pair in ALL_PAIRS
        if len({row.indicator(pair) for row in rows}) > 1
    ]
    if not varying:
        raise OLSError("no dialogue-act pair varies across the training rounds")
    X = np.array([[1.0] + [row.indicator(p) for p in varying] for row in rows])
    y = np.array([row.performance for row in rows])
    result = ols_fit(X, y, [INTERCEPT] + [pair_name(p) for p in varying])
    return result, varying


def rank_candidates(
    result: OLSResult,
    pairs: Sequence[Pair],
    *,
    direction: str,
    p_value_threshold: Optional[float],
    ranking: Ranking = "signed",
) -> List[Pair]:
    """
    Pairs ordered by how strongly their presence signals a round past the peak:
    most negative coefficient first when higher performance is better, most
    positive first for error metrics. "absolute" ranks by magnitude instead.
    """
    scored = []
    for pair in pairs:
        name = pair_name(pair)
        coef = result.coefficient(name)
        p = result.p_value(name)
        if coef is None or p is None:
            continue
        if p_value_threshold is not None and not p <= p_value_threshold:
            continue
        if ranking == "absolute":
            key = -abs(coef)
        else:
            key = coef if direction == "higher" else -coef
        scored.append((key, name, pair))
    scored.sort(key=lambda t: (t[0], t[1]))
    return [pair for _, _, pair in scored]


class DARule(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    params: Optional[DAHyperParams] = None
    pairs: List[Pair] = Field(default_factory=list)

    @property
    def active(self) -> bool:
        return self.params is not None and len(self.pairs) >= self.params.score_threshold

    def decide(self, simulation_id: str, rows: Sequence[DAFeatureRow], rounds: int) -> StopDecision:
        """Stop at the first round whose score (pairs seen at least count_per_round times) reaches the threshold."""
        if not self.active:
            return untriggered(simulation_id, rounds)
        assert self.params is not None
        for row in sorted(rows, key=lambda r: r.round):
            score = sum(
                1 for pair in self.pairs if row.counts.get(pair, 0) >= self.params.count_per_round
            )
            if score >= self.params.score_threshold:
                return stop_at(simulation_id, row.round, rounds)
        return untriggered(simulation_id, rounds)


class DASearchResult(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    rule: DARule
    train_performance: float
    final_round_performance: float
    evaluated: int


def _mean_at(
    rule: DARule,
    grouped: Dict[str, List[DAFeatureRow]],
    series: Dict[str, PerformanceSeries],
) -> float:
    total = 0.0
    for sim_id, s in series.items():
        decision = rule.decide(sim_id, grouped.get(sim_id, []), s.rounds)
        total += s.at(decision.stopped_round)
    return total / len(series)


def da_rule_search(
    rows: Sequence[DAFeatureRow],
    series: Sequence[PerformanceSeries],
    *,
    ranking: Ranking = "signed",
) -> DASearchResult:
    """
    Exhaustive search over the hyperparameter grid on the training simulations.
    Ties go to smaller top_da, then lower score_threshold. If nothing beats
    running every simulation to the final round, the rule stays untriggered.
    """
    if not series:
        raise StoppingError("dialogue-act rule search needs training simulations")
    by_id = {s.simulation_id: s for s in series}
    direction = series[0].direction
    grouped: Dict[str, List[DAFeatureRow]] = {}
    for row in rows:
        grouped.setdefault(row.simulation_id, []).append(row)

    baseline = DARule()
    baseline_perf = _mean_at(baseline, grouped, by_id)

    try:
        result, pairs = fit_pairs(rows)
    except OLSError as e:
        logger.info("dialogue-act rule left untriggered: %s", e)
        return DASearchResult(
            rule=baseline,
            train_performance=baseline_perf,
            final_round_performance=baseline_perf,
            evaluated=0,
        )

    ranked_by_p = {
        p: rank_candidates(
            result, pairs, direction=direction, p_value_threshold=p, ranking=ranking
        )
        for p in P_VALUE_THRESHOLDS
    }

    def better(a: float, b: float) -> bool:
        return a > b + 1e-12 if direction == "higher" else a < b - 1e-12

    best_rule, best_perf, evaluated = baseline, baseline_perf, 0
    best_key: Optional[Tuple[int, int]] = None
    for params in hyperparameter_grid():
        candidates = ranked_by_p[params.p_value_threshold][: params.top_da]
        rule = DARule(params=params, pairs=candidates)
        if not rule.active:
            continue
        evaluated += 1
        perf = _mean_at(rule, grouped, by_id)
        key = (params.top_da, params.score_threshold)
        if best_key is None:
            if not better(baseline_perf, perf):
                best_rule, best_perf, best_key = rule, perf, key
            continue
        if better(perf, best_perf) or (not better(best_perf, perf) and key < best_key):
            best_rule, best_perf, best_key = rule, perf, key

    return DASearchResult(
        rule=best_rule,
        train_performance=best_perf,
        final_round_performance=baseline_perf,
        evaluated=evaluated,
    )

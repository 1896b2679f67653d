# backend/app/stopping/crossval.py

"""
k-fold evaluation of the stopping rules.

Rules with parameters (validation checkpoint, information-difference
threshold, dialogue-act search) are fit on the training folds and applied to
the held-out fold; Oracle and the final round (@R) are reported alongside.
"""

from __future__ import annotations

import logging
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict

from app.engine.types import Transcript
from app.linguistics.transitions import LabeledSimulation
from app.stopping.dialogue_act_rule import DAFeatureRow, Ranking, Target, da_pair_features, da_rule_search
from app.stopping.rules import (
    StopDecision,
    checkpoint_decision,
    consecutive_agreements,
    final_round_decision,
    first_agreement,
    info_diff_rule,
    info_diff_threshold,
    oracle_decision,
    validation_checkpoint,
)
from app.stopping.series import PerformanceSeries, StoppingError

logger = logging.getLogger(__name__)

ORACLE = "oracle"
FINAL_ROUND = "final_round"
FIRST_AGREEMENT = "first_agreement"
CONSECUTIVE_AGREEMENTS = "consecutive_agreements"
VALIDATION = "validation"
INFO_DIFFERENCE = "info_difference"
DIALOGUE_ACT = "dialogue_act"

RULES = (
    ORACLE,
    FINAL_ROUND,
    FIRST_AGREEMENT,
    CONSECUTIVE_AGREEMENTS,
    VALIDATION,
    INFO_DIFFERENCE,
    DIALOGUE_ACT,
)


class SimulationData(BaseModel):
    """Everything the rules may look at for one simulation."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    series: PerformanceSeries
    transcript: Optional[Transcript] = None
    info_difference: Optional[List[Optional[float]]] = None
    labels: Optional[LabeledSimulation] = None

    @property
    def simulation_id(self) -> str:
        return self.series.simulation_id


class FoldOutcome(BaseModel):
    model_config = ConfigDict(frozen=True)

    rule: str
    fold: int
    simulation_id: str
    stopped_round: int
    triggered: bool
    early: bool
    performance: float
    threshold: Optional[float] = None


class RuleSummary(BaseModel):
    model_config = ConfigDict(frozen=True)

    rule: str
    mean_performance: float
    mean_stopped_round: float
    effective_ratio: float
    mean_threshold: Optional[float] = None


class CVReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    k: int
    seed: int
    direction: str
    outcomes: List[FoldOutcome]
    summary: List[RuleSummary]

    def rule(self, name: str) -> RuleSummary:
        for s in self.summary:
            if s.rule == name:
                return s
        raise KeyError(name)

    def outcomes_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [o.model_dump() for o in self.outcomes], columns=list(FoldOutcome.model_fields)
        )

    def summary_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [s.model_dump() for s in self.summary], columns=list(RuleSummary.model_fields)
        )


def kfold_indices(n: int, k: int, seed: int) -> List[np.ndarray]:
    """Seeded shuffle split into k folds whose sizes differ by at most one."""
    if k < 2:
        raise StoppingError(f"k-fold needs k >= 2, got {k}")
    if n < k:
        raise StoppingError(f"{k}-fold cross-validation needs at least {k} simulations, got {n}")
    order = np.random.default_rng(seed).permutation(n)
    return [np.sort(fold) for fold in np.array_split(order, k)]


def _require(sims: Sequence[SimulationData], rule: str) -> None:
    attr = {
        FIRST_AGREEMENT: "transcript",
        CONSECUTIVE_AGREEMENTS: "transcript",
        INFO_DIFFERENCE: "info_difference",
        DIALOGUE_ACT: "labels",
    }.get(rule)
    if attr is None:
        return
    missing = [s.simulation_id for s in sims if getattr(s, attr) is None]
    if missing:
        raise StoppingError(
            f"rule {rule!r} needs {attr.replace('_', ' ')} for every simulation; "
            f"missing for {len(missing)} (first: {missing[0]})"
        )


def _da_rows(sim: SimulationData, target: Target) -> List[DAFeatureRow]:
    assert sim.labels is not None
    return da_pair_features(sim.labels, sim.series, target=target)


def _apply_fold(
    rule: str,
    train: Sequence[SimulationData],
    test: Sequence[SimulationData],
    *,
    da_target: Target,
    da_ranking: Ranking,
) -> tuple[List[StopDecision], Optional[float]]:
    if rule == ORACLE:
        return [oracle_decision(s.series) for s in test], None
    if rule == FINAL_ROUND:
        return [final_round_decision(s.series) for s in test], None
    if rule == FIRST_AGREEMENT:
        return [first_agreement(s.transcript) for s in test], None
    if rule == CONSECUTIVE_AGREEMENTS:
        return [consecutive_agreements(s.transcript) for s in test], None
    if rule == VALIDATION:
        checkpoint = validation_checkpoint([s.series for s in train])
        return [
            checkpoint_decision(s.simulation_id, checkpoint, s.series.rounds) for s in test
        ], float(checkpoint)
    if rule == INFO_DIFFERENCE:
        threshold = info_diff_threshold(
            [s.series for s in train], [s.info_difference or [] for s in train]
        )
        return [
            info_diff_rule(s.simulation_id, s.info_difference or [], threshold, s.series.rounds)
            for s in test
        ], threshold
    if rule == DIALOGUE_ACT:
        rows = [row for s in train for row in _da_rows(s, da_target)]
        found = da_rule_search(rows, [s.series for s in train], ranking=da_ranking)
        logger.debug("dialogue-act rule: %s", found.rule)
        return [
            found.rule.decide(s.simulation_id, _da_rows(s, da_target), s.series.rounds)
            for s in test
        ], None
    raise StoppingError(f"unknown stopping rule {rule!r}; valid: {', '.join(RULES)}")


def kfold_evaluate(
    sims: Sequence[SimulationData],
    *,
    k: int = 5,
    seed: int = 0,
    rules: Sequence[str] = RULES,
    da_target: Target = "round",
    da_ranking: Ranking = "signed",
) -> CVReport:
    unknown = [r for r in rules if r not in RULES]
    if unknown:
        raise StoppingError(f"unknown stopping rules {unknown}; valid: {', '.join(RULES)}")
    directions = {s.series.direction for s in sims}
    if len(directions) > 1:
        raise StoppingError("simulations mix higher- and lower-is-better series")
    for rule in rules:
        _require(sims, rule)

    folds = kfold_indices(len(sims), k, seed)
    outcomes: List[FoldOutcome] = []
    for fold_no, test_idx in enumerate(folds):
        test_set = set(int(i) for i in test_idx)
        test = [sims[i] for i in sorted(test_set)]
        train = [s for i, s in enumerate(sims) if i not in test_set]
        for rule in rules:
            decisions, threshold = _apply_fold(
                rule, train, test, da_target=da_target, da_ranking=da_ranking
            )
            for sim, d in zip(test, decisions):
                outcomes.append(
                    FoldOutcome(
                        rule=rule,
                        fold=fold_no,
                        simulation_id=sim.simulation_id,
                        stopped_round=d.stopped_round,
                        triggered=d.triggered,
                        early=d.early,
                        performance=sim.series.at(d.stopped_round),
                        threshold=threshold,
                    )
                )

    summary = []
    for rule in rules:
        mine = [o for o in outcomes if o.rule == rule]
        thresholds = [o.threshold for o in mine if o.threshold is not None]
        summary.append(
            RuleSummary(
                rule=rule,
                mean_performance=float(np.mean([o.performance for o in mine])),
                mean_stopped_round=float(np.mean([o.stopped_round for o in mine])),
                effective_ratio=float(np.mean([o.early for o in mine])),
                mean_threshold=float(np.mean(thresholds)) if thresholds else None,
            )
        )
    return CVReport(
        k=k,
        seed=seed,
        direction=directions.pop() if directions else "higher",
        outcomes=outcomes,
        summary=summary,
    )

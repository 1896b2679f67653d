# backend/tests/test_stopping.py

import numpy as np
import pytest

from app.linguistics.dialogue_acts import DialogueAct, LabeledMessage
from app.linguistics.transitions import LabeledSimulation
from app.stopping.crossval import (
    DIALOGUE_ACT,
    FINAL_ROUND,
    INFO_DIFFERENCE,
    ORACLE,
    VALIDATION,
    SimulationData,
    kfold_evaluate,
    kfold_indices,
)
from app.stopping.dialogue_act_rule import (
    DAHyperParams,
    DARule,
    da_pair_features,
    da_rule_search,
    hyperparameter_grid,
    round_pair_counts,
)
from app.stopping.ols import OLSError, ols_fit, t_two_sided_p
from app.stopping.rules import (
    StopDecision,
    checkpoint_decision,
    consecutive_agreements,
    first_agreement,
    info_diff_rule,
    info_diff_threshold,
    oracle_round,
    validation_checkpoint,
)
from app.stopping.series import (
    PerformanceSeries,
    StoppingError,
    final_round,
    mean_performance,
    recommendation_series,
)

from builders import build_transcript

A = DialogueAct
PEAKED = [0.2, 0.6, 1.0, 0.5, 0.4]


def series(values, sim_id="sim-0", direction="higher"):
    return PerformanceSeries(simulation_id=sim_id, values=values, direction=direction)


def peaked_simulation(i):
    """Agents propose until the peak at round 3, then decline; performance shifted per simulation."""
    sim_id = f"sim-{i}"
    labels = [
        LabeledMessage(
            simulation_id=sim_id,
            round=r,
            agent=a,
            acts=frozenset({A.PROPOSE if r <= 3 else A.DECLINE}),
        )
        for r in range(1, 6)
        for a in range(2)
    ]
    return SimulationData(
        series=series([v + 0.01 * i for v in PEAKED], sim_id),
        labels=LabeledSimulation.build(sim_id, 5, 2, labels),
        info_difference=[None, 0.6, 0.3, 0.05, 0.05],
    )


# ----------------------------------------------------------------------
# OLS
# ----------------------------------------------------------------------


def test_ols_matches_closed_form():
    rng = np.random.default_rng(0)
    x = rng.normal(size=30)
    X = np.column_stack([np.ones(30), x])
    y = 1.5 - 2.0 * x + rng.normal(scale=0.1, size=30)
    fit = ols_fit(X, y, ["const", "x"])

    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    assert fit.coefficients == pytest.approx(beta.tolist())
    resid = y - X @ beta
    cov = (resid @ resid / 28) * np.linalg.inv(X.T @ X)
    assert fit.standard_errors == pytest.approx(np.sqrt(np.diag(cov)).tolist())
    assert fit.dof == 28
    assert fit.p_value("x") < 1e-6


def test_t_distribution_tail():
    assert t_two_sided_p(2.228, 10) == pytest.approx(0.05, abs=1e-3)
    assert t_two_sided_p(0.0, 5) == pytest.approx(1.0)
    assert t_two_sided_p(float("inf"), 5) == 0.0
    with pytest.raises(OLSError):
        t_two_sided_p(1.0, 0)


def test_dependent_column_is_dropped():
    x = np.arange(8, dtype=float)
    X = np.column_stack([np.ones(8), x, 2 * x])
    y = 3 + x + np.sin(x)
    fit = ols_fit(X, y, ["const", "a", "b"])
    assert len(fit.dropped) == 1
    assert len(fit.columns) == 2


def test_ols_needs_more_rows_than_columns():
    with pytest.raises(OLSError):
        ols_fit(np.ones((2, 2)), np.ones(2))


# ----------------------------------------------------------------------
# Series and simple rules
# ----------------------------------------------------------------------


def test_oracle_round_is_earliest_best():
    assert oracle_round(series([0.5, 0.9, 0.9, 0.3])) == 2
    assert oracle_round(series([3.0, 1.0, 1.0, 2.0], direction="lower")) == 2
    assert oracle_round(series([0.4, 0.4])) == 1


def test_validation_checkpoint_rounds_half_up():
    peaks = [series([0.0] * (r - 1) + [1.0] + [0.0] * (5 - r), f"s{r}") for r in (2, 3, 4)]
    assert validation_checkpoint(peaks) == 3
    assert validation_checkpoint(peaks[:2]) == 3
    with pytest.raises(StoppingError):
        validation_checkpoint([])


def test_checkpoint_at_final_round_is_untriggered():
    assert not checkpoint_decision("s", 5, 5).triggered
    assert checkpoint_decision("s", 2, 5).stopped_round == 2


def test_untriggered_decision_must_be_final():
    with pytest.raises(ValueError):
        StopDecision(simulation_id="s", stopped_round=2, rounds=5, triggered=False)


def test_info_difference_threshold_and_rule():
    train = [series([0.1, 0.9, 0.5], "a"), series([0.1, 0.5, 0.9], "b")]
    info = [[None, 0.4, 0.1], [None, 0.3, 0.2]]
    assert info_diff_threshold(train, info) == pytest.approx(0.3)

    decision = info_diff_rule("t", [None, 0.5, 0.2, 0.1], 0.3)
    assert decision.stopped_round == 3 and decision.triggered
    assert not info_diff_rule("t", [None, 0.5, 0.4], 0.3).triggered


def test_info_difference_threshold_undefined_when_every_peak_is_round_one():
    train = [series([0.9, 0.1], "a"), series([0.8, 0.2], "b")]
    with pytest.raises(StoppingError):
        info_diff_threshold(train, [[None, 0.1], [None, 0.2]])


def test_agreement_rules():
    t = build_transcript(
        rounds=5,
        proposals={1: {0: [1]}, 3: {0: [2]}, 5: {1: [3]}},
        selected={3: 0},
    )
    assert first_agreement(t).stopped_round == 3
    assert consecutive_agreements(t).stopped_round == 4

    never = build_transcript(rounds=4, proposals={1: {0: [1]}})
    assert not first_agreement(never).triggered
    assert consecutive_agreements(never).stopped_round == 4


def test_recommendation_series_is_absolute_error():
    t = build_transcript(
        rounds=3,
        proposals={2: {0: {"rating": 3.5}}},
        selected={2: 0},
        environment="recommendation",
        task="ex-1",
    )
    s = recommendation_series(t, 3.0)
    assert s.values == pytest.approx([1.0, 0.5, 0.5])
    assert s.direction == "lower"


def test_series_helpers():
    a, b = series([1.0, 2.0], "a"), series([3.0, 5.0], "b")
    assert mean_performance([a, b], [2, 1]) == pytest.approx(2.5)
    assert final_round([a, b]) == 2
    with pytest.raises(StoppingError):
        final_round([a, series([1.0], "c")])
    with pytest.raises(StoppingError):
        a.at(3)


# ----------------------------------------------------------------------
# Dialogue-act rule
# ----------------------------------------------------------------------


def test_grid_size():
    grid = list(hyperparameter_grid())
    assert len(grid) == 12 * (1 + 2 + 3 + 4 + 5)
    assert all(p.score_threshold <= p.top_da for p in grid)
    with pytest.raises(ValueError):
        DAHyperParams(top_da=1, count_per_round=1, score_threshold=2)


def test_round_pair_counts_skip_self_pairs():
    sim = peaked_simulation(0).labels
    assert round_pair_counts(sim, 4) == {(A.PROPOSE, A.DECLINE): 2}
    assert round_pair_counts(sim, 1) == {(A.START, A.PROPOSE): 2}


def test_rule_fires_on_watched_pairs():
    sim = peaked_simulation(0)
    rows = da_pair_features(sim.labels, sim.series)
    rule = DARule(
        params=DAHyperParams(top_da=1, count_per_round=2, score_threshold=1),
        pairs=[(A.PROPOSE, A.DECLINE)],
    )
    assert rule.decide("sim-0", rows, 5).stopped_round == 4
    strict = rule.model_copy(update={"params": rule.params.model_copy(update={"count_per_round": 3})})
    assert not strict.decide("sim-0", rows, 5).triggered


def test_search_beats_the_final_round_on_training_data():
    sims = [peaked_simulation(i) for i in range(8)]
    rows = [row for s in sims for row in da_pair_features(s.labels, s.series)]
    found = da_rule_search(rows, [s.series for s in sims])
    assert found.evaluated > 0
    assert found.rule.active
    assert found.train_performance > found.final_round_performance


def test_search_without_varying_pairs_stays_untriggered():
    sim = peaked_simulation(0)
    flat = LabeledSimulation.build(
        "sim-0",
        5,
        2,
        [
            LabeledMessage(simulation_id="sim-0", round=r, agent=a, acts=frozenset({A.INFORM}))
            for r in range(1, 6)
            for a in range(2)
        ],
    )
    rows = da_pair_features(flat, sim.series)
    found = da_rule_search(rows, [sim.series])
    assert not found.rule.active
    assert found.evaluated == 0


# ----------------------------------------------------------------------
# Cross-validation
# ----------------------------------------------------------------------


def test_kfold_indices_partition():
    folds = kfold_indices(10, 3, seed=0)
    assert sorted(len(f) for f in folds) == [3, 3, 4]
    assert sorted(int(i) for f in folds for i in f) == list(range(10))
    again = kfold_indices(10, 3, seed=0)
    assert all(np.array_equal(a, b) for a, b in zip(folds, again))
    with pytest.raises(StoppingError):
        kfold_indices(2, 3, seed=0)


def test_kfold_evaluate_on_peaked_simulations():
    sims = [peaked_simulation(i) for i in range(10)]
    rules = (ORACLE, FINAL_ROUND, VALIDATION, INFO_DIFFERENCE, DIALOGUE_ACT)
    report = kfold_evaluate(sims, k=5, seed=1, rules=rules)

    assert len(report.outcomes) == 10 * len(rules)
    for rule in rules:
        ids = [o.simulation_id for o in report.outcomes if o.rule == rule]
        assert sorted(ids) == sorted(s.simulation_id for s in sims)

    oracle = report.rule(ORACLE)
    final = report.rule(FINAL_ROUND)
    assert oracle.mean_stopped_round == 3.0
    assert final.mean_stopped_round == 5.0 and final.effective_ratio == 0.0
    assert report.rule(VALIDATION).mean_performance == pytest.approx(oracle.mean_performance)
    assert report.rule(VALIDATION).mean_threshold == 3.0
    assert report.rule(INFO_DIFFERENCE).mean_stopped_round == 4.0
    assert report.rule(DIALOGUE_ACT).mean_performance > final.mean_performance
    for summary in report.summary:
        assert summary.mean_performance <= oracle.mean_performance + 1e-12

    frame = report.summary_frame()
    assert list(frame["rule"]) == list(rules)


def test_kfold_evaluate_requires_rule_inputs():
    sims = [SimulationData(series=series(PEAKED, f"s{i}")) for i in range(4)]
    with pytest.raises(StoppingError):
        kfold_evaluate(sims, k=2, rules=(INFO_DIFFERENCE,))
    with pytest.raises(StoppingError):
        kfold_evaluate(sims, k=2, rules=("coin_flip",))

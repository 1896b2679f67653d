# backend/app/stopping/__init__.py

"""
Stopping package

Early-stopping rules over finished transcripts, the dialogue-act OLS rule
with its grid search, and k-fold evaluation against the Oracle and @R.
"""

from .crossval import RULES, CVReport, SimulationData, kfold_evaluate, kfold_indices
from .dialogue_act_rule import (
    DAHyperParams,
    DARule,
    da_pair_features,
    da_rule_search,
    hyperparameter_grid,
)
from .ols import OLSError, OLSResult, ols_fit, t_two_sided_p
from .rules import (
    StopDecision,
    consecutive_agreements,
    first_agreement,
    info_diff_rule,
    info_diff_threshold,
    oracle_round,
    validation_checkpoint,
)
from .series import PerformanceSeries, StoppingError, economy_series, recommendation_series

__all__ = [
    "CVReport",
    "DAHyperParams",
    "DARule",
    "OLSError",
    "OLSResult",
    "PerformanceSeries",
    "RULES",
    "SimulationData",
    "StopDecision",
    "StoppingError",
    "consecutive_agreements",
    "da_pair_features",
    "da_rule_search",
    "economy_series",
    "first_agreement",
    "hyperparameter_grid",
    "info_diff_rule",
    "info_diff_threshold",
    "kfold_evaluate",
    "kfold_indices",
    "ols_fit",
    "oracle_round",
    "recommendation_series",
    "t_two_sided_p",
    "validation_checkpoint",
]

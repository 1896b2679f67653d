# backend/app/environments/__init__.py

"""
Environments package

Task environments the agents collaborate in: the Cobb-Douglas exchange
economy and the distributed-table rating prediction, plus their metrics.
"""

from .base import Environment, ProposalRejected
from .econ_metrics import EconMetrics, econ_metrics
from .economy import EconomyEnvironment, UtilitySetPreset, cobb_douglas, group_total
from .recommendation import (
    RatingMetrics,
    RatingTask,
    RecommendationEnvironment,
    TableSchemaError,
    always_guess_four,
    ingest_tables,
    rating_metrics,
)
from .welfare import OptimizerConfig, OptimizerError, UMaxResult, u_max

__all__ = [
    "EconMetrics",
    "EconomyEnvironment",
    "Environment",
    "OptimizerConfig",
    "OptimizerError",
    "ProposalRejected",
    "RatingMetrics",
    "RatingTask",
    "RecommendationEnvironment",
    "TableSchemaError",
    "UMaxResult",
    "UtilitySetPreset",
    "always_guess_four",
    "cobb_douglas",
    "econ_metrics",
    "group_total",
    "ingest_tables",
    "rating_metrics",
    "u_max",
]

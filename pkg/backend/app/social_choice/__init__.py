# backend/app/social_choice/__init__.py

"""
Social choice package

Ballot shapes and the six tally mechanisms (unanimous, majority, plurality,
rated, ranked, cumulative) that turn one voting phase into a group decision.
"""

from .ballots import (  # re-export for convenience
    ABSTAIN,
    Abstain,
    Ballot,
    BallotCheck,
    BallotRecord,
    Cumulative,
    Deferred,
    Mechanism,
    Outcome,
    Ranked,
    Rated,
    Selected,
    SingleChoice,
    Tally,
    TallyResult,
    is_abstain,
)
from .tally import BallotError, borda_points, cumulative_budget, tally, validate_ballot

__all__ = [
    "ABSTAIN",
    "Abstain",
    "Ballot",
    "BallotCheck",
    "BallotError",
    "BallotRecord",
    "Cumulative",
    "Deferred",
    "Mechanism",
    "Outcome",
    "Ranked",
    "Rated",
    "Selected",
    "SingleChoice",
    "Tally",
    "TallyResult",
    "borda_points",
    "cumulative_budget",
    "is_abstain",
    "tally",
    "validate_ballot",
]

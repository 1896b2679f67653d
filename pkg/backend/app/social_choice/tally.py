# backend/app/social_choice/tally.py

from __future__ import annotations

import logging
import math
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence

from app.social_choice.ballots import (
    VALID,
    Abstain,
    Ballot,
    BallotCheck,
    Cumulative,
    Deferred,
    Mechanism,
    Ranked,
    Rated,
    Selected,
    SingleChoice,
    Tally,
    TallyResult,
    is_abstain,
)

logger = logging.getLogger(__name__)

RATED_MIN = 1
RATED_MAX = 5
CUMULATIVE_TOLERANCE = 1e-9


class BallotError(Exception):
    """Contract violation in the social-choice helpers (never raised for bad ballots)."""

    pass


def borda_points(position: int) -> Fraction:
    """
    Harmonic points for a ranked ballot: 1, 1/2, 1/3, ... for positions 1, 2, 3, ...
    """
    if position < 1:
        raise BallotError(f"Ranked position must be >= 1, got {position}")
    return Fraction(1, position)


def cumulative_budget(slate_size: int) -> float:
    """
    Points each agent distributes under cumulative voting: one point per candidate.
    """
    if slate_size < 1:
        raise BallotError(f"Slate must hold at least one candidate, got {slate_size}")
    return float(slate_size)


def _disqualified(reason: str) -> BallotCheck:
    return BallotCheck(valid=False, reason=reason)


def validate_ballot(
    mechanism: Mechanism,
    slate: Sequence[int],
    ballot: Ballot,
    budget: Optional[float] = None,
    *,
    strict_integer_cumulative: bool = False,
) -> BallotCheck:
    """
    Total function: returns VALID or a disqualification with a machine-readable reason.

    Abstentions (whole-ballot or single-choice None) are valid under every mechanism;
    the tally counts them separately.
    """
    if is_abstain(ballot):
        return VALID

    ids = set(slate)

    if mechanism.is_one_vote:
        if not isinstance(ballot, SingleChoice):
            return _disqualified("wrong_shape")
        if ballot.candidate not in ids:
            return _disqualified("unknown_candidate")
        return VALID

    if mechanism is Mechanism.RATED:
        if not isinstance(ballot, Rated):
            return _disqualified("wrong_shape")
        if set(ballot.scores) - ids:
            return _disqualified("unknown_candidate")
        if ids - set(ballot.scores):
            return _disqualified("missing_candidate")
        for score in ballot.scores.values():
            if isinstance(score, bool) or not isinstance(score, int):
                return _disqualified("score_not_integer")
            if not RATED_MIN <= score <= RATED_MAX:
                return _disqualified("score_out_of_range")
        return VALID

    if mechanism is Mechanism.RANKED:
        if not isinstance(ballot, Ranked):
            return _disqualified("wrong_shape")
        if set(ballot.order) - ids:
            return _disqualified("unknown_candidate")
        if len(ballot.order) != len(ids) or set(ballot.order) != ids:
            return _disqualified("not_a_permutation")
        return VALID

    # Cumulative
    if not isinstance(ballot, Cumulative):
        return _disqualified("wrong_shape")
    if set(ballot.points) - ids:
        return _disqualified("unknown_candidate")
    if not all(math.isfinite(p) for p in ballot.points.values()):
        return _disqualified("non_finite_points")
    if any(p < 0 for p in ballot.points.values()):
        return _disqualified("negative_points")
    if strict_integer_cumulative and any(float(p) != int(p) for p in ballot.points.values()):
        return _disqualified("non_integer_points")
    expected = budget if budget is not None else cumulative_budget(len(ids))
    if abs(sum(ballot.points.values()) - expected) > CUMULATIVE_TOLERANCE:
        return _disqualified("sum_mismatch")
    return VALID


def _unique_max(totals: Dict[int, Fraction], tolerance: Fraction = Fraction(0)) -> Optional[int]:
    best = max(totals.values())
    leaders = [c for c, v in totals.items() if best - v <= tolerance]
    if len(leaders) != 1:
        return None
    return leaders[0]


def tally(
    mechanism: Mechanism,
    slate: Sequence[int],
    ballots: Mapping[int, Ballot],
    total_agents: int,
    *,
    budget: Optional[float] = None,
    strict_integer_cumulative: bool = False,
) -> TallyResult:
    """
    Aggregate one voting phase into Selected(candidate) or Deferred.

    Agents missing from `ballots` count as abstentions. Disqualified ballots are
    counted (and logged) but contribute nothing.
    """
    if not slate:
        return TallyResult(outcome=Deferred(reason="empty_slate"))

    if budget is None and mechanism is Mechanism.CUMULATIVE:
        budget = cumulative_budget(len(slate))

    totals: Dict[int, Fraction] = {c: Fraction(0) for c in slate}
    valid = abstain = disqualified = 0

    for agent in sorted(ballots):
        ballot = ballots[agent]
        if is_abstain(ballot):
            abstain += 1
            continue
        check = validate_ballot(
            mechanism,
            slate,
            ballot,
            budget,
            strict_integer_cumulative=strict_integer_cumulative,
        )
        if not check.valid:
            disqualified += 1
            logger.info("agent %s ballot disqualified: %s", agent, check.reason)
            continue
        valid += 1
        _accumulate(mechanism, totals, ballot)

    abstain += max(0, total_agents - len(ballots))

    summary = Tally(
        totals=totals,
        valid_ballot_count=valid,
        abstain_count=abstain,
        disqualified_count=disqualified,
    )
    return TallyResult(outcome=_decide(mechanism, totals, valid, total_agents), tally=summary)


def _accumulate(mechanism: Mechanism, totals: Dict[int, Fraction], ballot: Ballot) -> None:
    if isinstance(ballot, SingleChoice):
        totals[ballot.candidate] += 1
    elif isinstance(ballot, Rated):
        for cand, score in ballot.scores.items():
            totals[cand] += score
    elif isinstance(ballot, Ranked):
        for position, cand in enumerate(ballot.order, start=1):
            totals[cand] += borda_points(position)
    elif isinstance(ballot, Cumulative):
        for cand, pts in ballot.points.items():
            totals[cand] += Fraction(pts)
    elif isinstance(ballot, Abstain):
        pass


def _decide(mechanism: Mechanism, totals: Dict[int, Fraction], valid: int, k: int):
    if mechanism is Mechanism.UNANIMOUS or mechanism is Mechanism.MAJORITY:
        if mechanism is Mechanism.UNANIMOUS:
            passed: List[int] = [c for c, v in totals.items() if v == k]
        else:
            passed = [c for c, v in totals.items() if 2 * v > k]
        if not passed:
            return Deferred(reason="threshold_not_met")
        # unreachable with one vote per agent; kept as the prompts' guard
        if len(passed) > 1:
            return Deferred(reason="multiple_passed")
        return Selected(candidate=passed[0])

    if valid == 0:
        return Deferred(reason="no_valid_ballots")

    tolerance = Fraction(CUMULATIVE_TOLERANCE) if mechanism is Mechanism.CUMULATIVE else Fraction(0)
    winner = _unique_max(totals, tolerance)
    if winner is None:
        return Deferred(reason="tie")
    return Selected(candidate=winner)

# backend/tests/test_social_choice.py

import itertools
from collections import Counter
from fractions import Fraction

import pytest

from app.social_choice import (
    ABSTAIN,
    BallotError,
    Cumulative,
    Deferred,
    Mechanism,
    Ranked,
    Rated,
    Selected,
    SingleChoice,
    Tally,
    borda_points,
    cumulative_budget,
    tally,
    validate_ballot,
)

APPLE, BANANA, CARROT = 1, 2, 3
ONE_VOTE = (Mechanism.UNANIMOUS, Mechanism.MAJORITY, Mechanism.PLURALITY)


def naive_outcome(mechanism, slate, votes, k):
    """Independent single-choice counter; `votes` holds a candidate id or None per agent."""
    counts = Counter(v for v in votes if v is not None)
    if mechanism is Mechanism.UNANIMOUS:
        passed = [c for c in slate if counts[c] == k]
        return Selected(candidate=passed[0]) if passed else Deferred(reason="threshold_not_met")
    if mechanism is Mechanism.MAJORITY:
        passed = [c for c in slate if counts[c] > k / 2]
        return Selected(candidate=passed[0]) if passed else Deferred(reason="threshold_not_met")
    if not counts:
        return Deferred(reason="no_valid_ballots")
    best = max(counts[c] for c in slate)
    leaders = [c for c in slate if counts[c] == best]
    return Selected(candidate=leaders[0]) if len(leaders) == 1 else Deferred(reason="tie")


def single_choice_profiles(slate, k):
    return itertools.product([None, *slate], repeat=k)


def as_ballots(votes):
    return {
        i: ABSTAIN if v is None else SingleChoice(candidate=v) for i, v in enumerate(votes)
    }


# ----------------------------------------------------------------------
# Worked examples
# ----------------------------------------------------------------------


def test_majority_selects_apple():
    ballots = {
        0: SingleChoice(candidate=APPLE),
        1: SingleChoice(candidate=APPLE),
        2: SingleChoice(candidate=BANANA),
    }
    result = tally(Mechanism.MAJORITY, [APPLE, BANANA, CARROT], ballots, 3)
    assert result.outcome == Selected(candidate=APPLE)
    assert result.tally.totals[APPLE] == 2
    assert result.tally.valid_ballot_count == 3


def test_unanimous_needs_every_agent_not_every_voter():
    ballots = {0: SingleChoice(candidate=APPLE), 1: SingleChoice(candidate=APPLE), 2: ABSTAIN}
    result = tally(Mechanism.UNANIMOUS, [APPLE, BANANA, CARROT], ballots, 3)
    assert result.outcome == Deferred(reason="threshold_not_met")
    assert result.tally.abstain_count == 1


def test_missing_agents_count_as_abstentions():
    result = tally(Mechanism.MAJORITY, [APPLE, BANANA], {0: SingleChoice(candidate=APPLE)}, 3)
    assert isinstance(result.outcome, Deferred)
    t = result.tally
    assert t.valid_ballot_count + t.abstain_count + t.disqualified_count == 3


def test_empty_slate_defers_without_tally():
    result = tally(Mechanism.PLURALITY, [], {}, 3)
    assert result.outcome == Deferred(reason="empty_slate")
    assert result.tally is None


def test_plurality_tie_defers():
    ballots = {0: SingleChoice(candidate=APPLE), 1: SingleChoice(candidate=BANANA), 2: ABSTAIN}
    assert tally(Mechanism.PLURALITY, [APPLE, BANANA], ballots, 3).outcome == Deferred(reason="tie")


@pytest.mark.parametrize("mechanism", [Mechanism.PLURALITY, Mechanism.RATED, Mechanism.RANKED, Mechanism.CUMULATIVE])
def test_score_mechanisms_defer_without_valid_ballots(mechanism):
    result = tally(mechanism, [APPLE, BANANA], {0: ABSTAIN, 1: ABSTAIN}, 2)
    assert result.outcome == Deferred(reason="no_valid_ballots")


# ----------------------------------------------------------------------
# Exhaustive single-choice checks
# ----------------------------------------------------------------------


@pytest.mark.parametrize("mechanism", ONE_VOTE)
@pytest.mark.parametrize("k", [1, 2, 3, 4])
@pytest.mark.parametrize("n_candidates", [1, 2, 3, 4])
def test_one_vote_mechanisms_match_naive_counter(mechanism, k, n_candidates):
    slate = list(range(1, n_candidates + 1))
    for votes in single_choice_profiles(slate, k):
        got = tally(mechanism, slate, as_ballots(votes), k).outcome
        assert got == naive_outcome(mechanism, slate, votes, k), (mechanism, votes)


@pytest.mark.parametrize("k", [2, 3, 4])
def test_acceptance_strictness_is_monotone(k):
    slate = [1, 2, 3]
    for votes in single_choice_profiles(slate, k):
        ballots = as_ballots(votes)
        u = tally(Mechanism.UNANIMOUS, slate, ballots, k).outcome
        m = tally(Mechanism.MAJORITY, slate, ballots, k).outcome
        p = tally(Mechanism.PLURALITY, slate, ballots, k).outcome
        if isinstance(u, Selected):
            assert m == u
        if isinstance(m, Selected):
            assert p == m


@pytest.mark.parametrize("mechanism", ONE_VOTE)
def test_turning_an_abstention_into_a_winning_vote_keeps_the_winner(mechanism):
    slate, k = [1, 2, 3], 4
    for votes in single_choice_profiles(slate, k):
        outcome = tally(mechanism, slate, as_ballots(votes), k).outcome
        if not isinstance(outcome, Selected) or None not in votes:
            continue
        changed = list(votes)
        changed[changed.index(None)] = outcome.candidate
        assert tally(mechanism, slate, as_ballots(changed), k).outcome == outcome


# ----------------------------------------------------------------------
# Ranked
# ----------------------------------------------------------------------


def test_borda_points_are_exact_harmonic():
    assert borda_points(1) == 1
    assert borda_points(2) == Fraction(1, 2)
    assert borda_points(7) == Fraction(1, 7)
    with pytest.raises(BallotError):
        borda_points(0)


def brute_force_ranked(slate, orders):
    totals = {c: Fraction(0) for c in slate}
    for order in orders:
        for position, c in enumerate(order, start=1):
            totals[c] += Fraction(1, position)
    return totals


def test_ranked_winner_matches_brute_force():
    orders = [[1, 2, 3], [1, 3, 2], [2, 1, 3]]
    expected = brute_force_ranked([1, 2, 3], orders)
    assert expected[1] == Fraction(5, 2)

    result = tally(Mechanism.RANKED, [1, 2, 3], {i: Ranked(order=o) for i, o in enumerate(orders)}, 3)
    assert result.tally.totals == expected
    assert result.outcome == Selected(candidate=1)


def test_ranked_totals_do_not_depend_on_processing_order():
    orders = [[1, 2, 3], [3, 2, 1], [2, 3, 1], [3, 1, 2]]
    first = tally(Mechanism.RANKED, [1, 2, 3], {i: Ranked(order=o) for i, o in enumerate(orders)}, 4)
    for perm in itertools.permutations(orders):
        again = tally(Mechanism.RANKED, [1, 2, 3], {i: Ranked(order=o) for i, o in enumerate(perm)}, 4)
        assert again.tally.totals == first.tally.totals


def test_ranked_exact_tie_defers():
    # candidate 1: 1 + 1/3, candidate 3: 1/3 + 1 -> exact tie at 4/3
    ballots = {0: Ranked(order=[1, 2, 3]), 1: Ranked(order=[3, 2, 1])}
    result = tally(Mechanism.RANKED, [1, 2, 3], ballots, 2)
    assert result.tally.totals[1] == result.tally.totals[3] == Fraction(4, 3)
    assert result.outcome == Deferred(reason="tie")


def test_partial_ranking_is_disqualified():
    check = validate_ballot(Mechanism.RANKED, [1, 2, 3], Ranked(order=[1, 2]))
    assert check.reason == "not_a_permutation"


# ----------------------------------------------------------------------
# Rated / cumulative
# ----------------------------------------------------------------------


def test_rated_validation():
    assert validate_ballot(Mechanism.RATED, [1, 2], Rated(scores={1: 5, 2: 3})).valid
    bad = validate_ballot(Mechanism.RATED, [1, 2], Rated(scores={1: 6, 2: 3}))
    assert not bad.valid and bad.reason == "score_out_of_range"
    missing = validate_ballot(Mechanism.RATED, [1, 2], Rated(scores={1: 5}))
    assert missing.reason == "missing_candidate"


def test_rated_totals_are_bounded_by_ballot_count():
    ballots = {0: Rated(scores={1: 5, 2: 1}), 1: Rated(scores={1: 2, 2: 4}), 2: Rated(scores={1: 1, 2: 1})}
    result = tally(Mechanism.RATED, [1, 2], ballots, 3)
    valid = result.tally.valid_ballot_count
    for total in result.tally.totals.values():
        assert valid * 1 <= total <= valid * 5
    assert result.outcome == Selected(candidate=1)


def test_cumulative_budget_is_slate_size():
    assert cumulative_budget(3) == 3
    assert cumulative_budget(1) == 1
    assert cumulative_budget(4) == 4


def test_cumulative_sum_mismatch_is_disqualified():
    check = validate_ballot(Mechanism.CUMULATIVE, [1, 2], Cumulative(points={1: 2.0, 2: 0.5}), 3)
    assert not check.valid and check.reason == "sum_mismatch"
    negative = validate_ballot(Mechanism.CUMULATIVE, [1, 2], Cumulative(points={1: 3.0, 2: -1.0}))
    assert negative.reason == "negative_points"


def test_cumulative_strict_integer_flag():
    ballot = Cumulative(points={1: 1.5, 2: 0.5})
    assert validate_ballot(Mechanism.CUMULATIVE, [1, 2], ballot).valid
    strict = validate_ballot(Mechanism.CUMULATIVE, [1, 2], ballot, strict_integer_cumulative=True)
    assert strict.reason == "non_integer_points"


@pytest.mark.parametrize("bad", [float("nan"), float("inf")])
def test_non_finite_points_are_disqualified(bad):
    check = validate_ballot(Mechanism.CUMULATIVE, [1, 2], Cumulative(points={1: bad, 2: 2.0}))
    assert not check.valid and check.reason == "non_finite_points"

    ballots = {
        0: Cumulative(points={1: bad, 2: 2.0}),
        1: Cumulative(points={1: 0.0, 2: 2.0}),
        2: Cumulative(points={1: 0.5, 2: 1.5}),
    }
    result = tally(Mechanism.CUMULATIVE, [1, 2], ballots, 3)
    assert result.outcome == Selected(candidate=2)
    assert result.tally.disqualified_count == 1
    assert result.tally.valid_ballot_count == 2


def test_cumulative_totals_sum_to_budget_per_valid_ballot():
    ballots = {
        0: Cumulative(points={1: 1.5, 2: 1.0, 3: 0.5}),
        1: Cumulative(points={1: 0.0, 2: 3.0}),
        2: Cumulative(points={1: 1.0, 2: 1.0, 3: 2.0}),  # sums to 4: disqualified
    }
    result = tally(Mechanism.CUMULATIVE, [1, 2, 3], ballots, 3)
    assert result.tally.disqualified_count == 1
    assert float(sum(result.tally.totals.values())) == pytest.approx(2 * 3.0, abs=1e-9)
    assert result.outcome == Selected(candidate=2)


def test_disqualified_ballot_counts_as_abstention_in_the_tally():
    ballots = {0: SingleChoice(candidate=9), 1: SingleChoice(candidate=1), 2: SingleChoice(candidate=1)}
    result = tally(Mechanism.MAJORITY, [1, 2], ballots, 3)
    assert result.outcome == Selected(candidate=1)
    assert result.tally.disqualified_count == 1


def test_wrong_shape_is_disqualified():
    check = validate_ballot(Mechanism.PLURALITY, [1, 2], Rated(scores={1: 3, 2: 3}))
    assert check.reason == "wrong_shape"


def test_tally_serializes_exact_rationals():
    t = Tally(totals={1: Fraction(11, 6)}, valid_ballot_count=1)
    dumped = t.model_dump(mode="json")
    assert dumped["totals"] == {"1": "11/6"}
    assert Tally.model_validate(dumped).totals[1] == Fraction(11, 6)


def test_mechanism_parse_names_valid_values():
    assert Mechanism.parse("majority") is Mechanism.MAJORITY
    with pytest.raises(ValueError, match="Unanimous, Majority, Plurality, Rated, Ranked, Cumulative"):
        Mechanism.parse("Borda")

# backend/app/social_choice/ballots.py

"""
Ballot shapes, mechanisms and tally results.

All models are frozen pydantic models so they can be embedded in transcripts
and shared read-only between concurrent tallies.
"""

from __future__ import annotations

from enum import Enum
from fractions import Fraction
from typing import Annotated, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, PlainSerializer, PlainValidator


class Mechanism(str, Enum):
    UNANIMOUS = "Unanimous"
    MAJORITY = "Majority"
    PLURALITY = "Plurality"
    RATED = "Rated"
    RANKED = "Ranked"
    CUMULATIVE = "Cumulative"

    @property
    def is_one_vote(self) -> bool:
        return self in ONE_VOTE_MECHANISMS

    @classmethod
    def parse(cls, name: str) -> "Mechanism":
        """Case-insensitive lookup; the error names every valid value."""
        for m in cls:
            if m.value.lower() == name.strip().lower():
                return m
        valid = ", ".join(m.value for m in cls)
        raise ValueError(f"Unknown mechanism {name!r}. Valid values: {valid}")


ONE_VOTE_MECHANISMS = frozenset({Mechanism.UNANIMOUS, Mechanism.MAJORITY, Mechanism.PLURALITY})


def _parse_fraction(value: object) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    raise ValueError(f"Expected an exact rational or 'num/den' string, got {value!r}")


def _format_fraction(value: Fraction) -> str:
    return f"{value.numerator}/{value.denominator}"


# Exact rationals serialize as "num/den" strings inside transcripts.
ExactRational = Annotated[
    Fraction,
    PlainValidator(_parse_fraction),
    PlainSerializer(_format_fraction, return_type=str),
]


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True)


class SingleChoice(_Frozen):
    kind: Literal["single"] = "single"
    candidate: Optional[int] = None  # None == ABSTAIN

    @property
    def is_abstain(self) -> bool:
        return self.candidate is None


class Rated(_Frozen):
    kind: Literal["rated"] = "rated"
    scores: Dict[int, int]


class Ranked(_Frozen):
    kind: Literal["ranked"] = "ranked"
    order: List[int]  # most-preferred first


class Cumulative(_Frozen):
    # non-finite points are disqualified but still recorded; keep them readable on disk
    model_config = ConfigDict(frozen=True, ser_json_inf_nan="constants")

    kind: Literal["cumulative"] = "cumulative"
    points: Dict[int, float]


class Abstain(_Frozen):
    kind: Literal["abstain"] = "abstain"


Ballot = Annotated[
    Union[SingleChoice, Rated, Ranked, Cumulative, Abstain],
    Field(discriminator="kind"),
]

ABSTAIN = Abstain()


def is_abstain(ballot: Ballot) -> bool:
    return isinstance(ballot, Abstain) or (
        isinstance(ballot, SingleChoice) and ballot.candidate is None
    )


class BallotCheck(_Frozen):
    """Result of validate_ballot: valid, or disqualified with a machine-readable reason."""

    valid: bool
    reason: Optional[str] = None


VALID = BallotCheck(valid=True)


class BallotRecord(_Frozen):
    ballot: Ballot
    status: Literal["valid", "abstain", "disqualified"]
    reason: Optional[str] = None


class Tally(_Frozen):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    totals: Dict[int, ExactRational]
    valid_ballot_count: int = 0
    abstain_count: int = 0
    disqualified_count: int = 0


class Selected(_Frozen):
    kind: Literal["selected"] = "selected"
    candidate: int


class Deferred(_Frozen):
    kind: Literal["deferred"] = "deferred"
    reason: Optional[str] = None


Outcome = Annotated[Union[Selected, Deferred], Field(discriminator="kind")]


class TallyResult(_Frozen):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    outcome: Outcome
    tally: Optional[Tally] = None

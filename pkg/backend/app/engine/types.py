# backend/app/engine/types.py

"""
Domain types shared by the round engine, the agent policies and the analyses.

Everything here is a frozen pydantic model: a committed round is never mutated,
so transcripts and context snapshots can be shared read-only across tasks.
"""

from __future__ import annotations

import json
import math
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.social_choice import BallotRecord, Mechanism, Outcome, Tally

TRANSCRIPT_VERSION = 1
CANONICAL_DECIMALS = 6

Phase = Literal["message", "proposal", "voting"]


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True)


class AgentId(_Frozen):
    index: int = Field(ge=0)
    display_name: str = Field(min_length=1)


class Message(_Frozen):
    sender: AgentId
    targets: List[AgentId] = Field(min_length=1)
    text: str = Field(min_length=1)
    # degraded action: the policy failed every attempt
    skipped: bool = False


def _canonicalize(value: Any) -> Any:
    if isinstance(value, bool) or value is None or isinstance(value, str):
        return value
    if isinstance(value, (int, float)):
        if not math.isfinite(float(value)):
            raise ValueError(f"Non-finite number in proposal body: {value!r}")
        rounded = round(float(value), CANONICAL_DECIMALS)
        return 0.0 if rounded == 0 else rounded
    if isinstance(value, dict):
        return {str(k): _canonicalize(v) for k, v in sorted(value.items(), key=lambda kv: str(kv[0]))}
    if isinstance(value, (list, tuple)):
        return [_canonicalize(v) for v in value]
    raise ValueError(f"Unsupported value in proposal body: {type(value).__name__}")


class ProposalBody(_Frozen):
    """
    Environment-specific payload plus its canonical serialized form.

    Two bodies are the same proposal iff `canonical` strings are equal.
    Numbers are normalized to floats rounded to 6 decimals, keys are sorted.
    """

    payload: Any
    canonical: str

    @classmethod
    def from_payload(cls, payload: Any) -> "ProposalBody":
        normalized = _canonicalize(payload)
        canonical = json.dumps(normalized, sort_keys=True, separators=(",", ":"))
        return cls(payload=normalized, canonical=canonical)

    @property
    def canonical_bytes(self) -> bytes:
        return self.canonical.encode("utf-8")


class Proposal(_Frozen):
    id: int = Field(ge=1)
    round: int = Field(ge=1)
    authors: List[int] = Field(min_length=1)  # agent indices, sorted
    body: ProposalBody

    @field_validator("authors")
    @classmethod
    def _sorted_unique(cls, v: List[int]) -> List[int]:
        return sorted(set(v))


class AcceptedEntry(_Frozen):
    round: int
    proposal: Proposal


class PhaseFailure(_Frozen):
    agent: int
    phase: Phase
    attempts: int
    error: str


class RoundRecord(_Frozen):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    round: int = Field(ge=1)
    messages: List[Message]
    new_proposals: Dict[int, Optional[Proposal]]
    slate: List[Proposal]
    ballots: Dict[int, BallotRecord]
    outcome: Outcome
    tally: Optional[Tally] = None
    # reason_for_decision per agent; persisted, hidden from other agents by default
    reasoning: Dict[int, Optional[str]] = Field(default_factory=dict)
    vote_reasoning: Dict[int, Optional[str]] = Field(default_factory=dict)
    failures: List[PhaseFailure] = Field(default_factory=list)

    @property
    def selected(self) -> bool:
        return self.outcome.kind == "selected"

    @property
    def any_new_proposal(self) -> bool:
        return any(p is not None for p in self.new_proposals.values())


class EngineConfig(_Frozen):
    rounds: int = Field(default=10, ge=1)
    agents: List[AgentId]
    mechanism: Mechanism
    environment: str
    task: str  # utility-set preset (economy) or task/example id (recommendation)
    seed: int = 0
    share_reasoning: bool = False
    strict_integer_cumulative: bool = False
    max_attempts: int = Field(default=3, ge=1)

    @model_validator(mode="after")
    def _check_roster(self) -> "EngineConfig":
        if len(self.agents) < 2:
            raise ValueError("At least two agents (K >= 2) are required.")
        indices = [a.index for a in self.agents]
        if indices != list(range(len(indices))):
            raise ValueError(f"Agent indices must be 0..K-1 in order, got {indices}")
        return self

    @property
    def agent_count(self) -> int:
        return len(self.agents)


class Transcript(_Frozen):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    v: Literal[1] = TRANSCRIPT_VERSION
    simulation_id: str
    config: EngineConfig
    seed: int
    rounds: List[RoundRecord]
    accepted_history: List[AcceptedEntry]
    final_decision: Optional[Proposal] = None

    @model_validator(mode="after")
    def _check_final(self) -> "Transcript":
        expected = self.accepted_history[-1].proposal if self.accepted_history else None
        if self.final_decision != expected:
            raise ValueError("final_decision must equal the last accepted proposal")
        if len(self.rounds) != self.config.rounds:
            raise ValueError(
                f"Transcript holds {len(self.rounds)} rounds, config says {self.config.rounds}"
            )
        return self

    def standing_after(self, round_num: int) -> Optional[Proposal]:
        """Latest accepted proposal at the end of round `round_num` (None before any)."""
        standing = None
        for entry in self.accepted_history:
            if entry.round <= round_num:
                standing = entry.proposal
        return standing


class ContextView(_Frozen):
    """
    Read-only snapshot handed to a policy. Identical for every agent within a phase
    except the `me`, `background` and `utility_spec` fields.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    task_description: str
    me: AgentId
    background: str
    utility_spec: Optional[str] = None
    roster: List[AgentId]
    mechanism: Mechanism
    max_rounds: int
    round: int
    phase: Phase
    conversation: List[Message]
    latest_proposals: Dict[int, Proposal]
    latest_slate: List[Proposal]
    latest_slate_round: Optional[int] = None
    latest_votes: Dict[int, BallotRecord] = Field(default_factory=dict)
    latest_outcome: Optional[Outcome] = None
    latest_vote_round: Optional[int] = None
    latest_accepted: Optional[AcceptedEntry] = None
    shared_reasoning: Dict[int, str] = Field(default_factory=dict)

    def name_of(self, index: int) -> str:
        return self.roster[index].display_name

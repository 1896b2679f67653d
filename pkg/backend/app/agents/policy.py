# backend/app/agents/policy.py

from __future__ import annotations

from typing import Any, List, Optional, Protocol

from pydantic import BaseModel, ConfigDict

from app.engine.types import ContextView, Proposal
from app.social_choice import ABSTAIN, Ballot, Mechanism


class AgentPolicyError(Exception):
    """A policy could not produce an action for the current phase."""

    pass


class ReplyParseError(AgentPolicyError):
    """Provider reply held no usable JSON object for the phase."""

    pass


class PromptConfigError(AgentPolicyError):
    """Prompt template rendered with a missing or unknown variable."""

    pass


class _Action(BaseModel):
    model_config = ConfigDict(frozen=True)


class MessageAction(_Action):
    targets: List[int]  # agent indices; empty means everyone else
    text: str


class ProposalAction(_Action):
    payload: Optional[Any] = None  # None == skip
    reasoning: Optional[str] = None

    @property
    def skipped(self) -> bool:
        return self.payload is None


class BallotAction(_Action):
    ballot: Ballot = ABSTAIN
    reasoning: Optional[str] = None


SKIP_PROPOSAL = ProposalAction()


class AgentPolicy(Protocol):
    """
    One agent's decision functions. Each call sees only the phase-start
    snapshot; raising signals a failed attempt and the engine retries.
    """

    async def decide_message(self, view: ContextView) -> MessageAction: ...

    async def decide_proposal(self, view: ContextView) -> ProposalAction: ...

    async def decide_ballot(
        self, view: ContextView, slate: List[Proposal], mechanism: Mechanism
    ) -> BallotAction: ...

# backend/app/agents/scripted.py

"""
Deterministic stand-in agents.

They propose from the environment's scripted hooks and vote by their own
utility, which gives the agree / deadlock spectrum needed to exercise the
mechanisms without a model behind the policy.
"""

from __future__ import annotations

import logging
import math
from enum import Enum
from typing import Callable, Dict, List, Mapping, Optional, Sequence

import numpy as np

from app.agents.policy import BallotAction, MessageAction, ProposalAction, SKIP_PROPOSAL
from app.engine.types import ContextView, Proposal, ProposalBody
from app.environments.base import Environment
from app.social_choice import (
    ABSTAIN,
    Ballot,
    Cumulative,
    Mechanism,
    Ranked,
    Rated,
    SingleChoice,
    cumulative_budget,
)

logger = logging.getLogger(__name__)

_PHASE_CODES = {"message": 0, "proposal": 1, "voting": 2}


class ScriptedKind(str, Enum):
    SELFISH = "selfish"
    EVEN_SPLIT = "even_split"
    CONCESSIVE = "concessive"
    RANDOM = "random"


# ----------------------------------------------------------------------
# Ballots
# ----------------------------------------------------------------------


def ballot_from_utilities(
    utilities: Mapping[int, float],
    mechanism: Mechanism,
    budget: Optional[float] = None,
) -> Ballot:
    """
    Ballot of an agent that only looks at its own utility of each candidate:

      one-vote:   argmax (lowest id on ties)
      rated:      min-max scaled onto 1..5 (all equal -> all 3)
      ranked:     descending utility, ties by id
      cumulative: budget split in proportion to utility (all zero -> uniform)
    """
    if not utilities:
        return ABSTAIN
    ids = sorted(utilities)
    by_pref = sorted(ids, key=lambda c: (-utilities[c], c))

    if mechanism.is_one_vote:
        return SingleChoice(candidate=by_pref[0])

    if mechanism is Mechanism.RANKED:
        return Ranked(order=by_pref)

    if mechanism is Mechanism.RATED:
        low = min(utilities.values())
        high = max(utilities.values())
        if high - low <= 0:
            return Rated(scores={c: 3 for c in ids})
        return Rated(
            scores={
                c: 1 + math.floor(4 * (utilities[c] - low) / (high - low) + 0.5) for c in ids
            }
        )

    # Cumulative
    if budget is None:
        budget = cumulative_budget(len(ids))
    positive = {c: max(utilities[c], 0.0) for c in ids}
    total = math.fsum(positive.values())
    if total <= 0:
        return Cumulative(points={c: budget / len(ids) for c in ids})
    return Cumulative(points={c: budget * positive[c] / total for c in ids})


def scripted_ballot(
    utility: Callable[[ProposalBody], float],
    slate: Sequence[Proposal],
    mechanism: Mechanism,
    budget: Optional[float] = None,
) -> Ballot:
    """Evaluate the agent's utility on every candidate; any evaluation failure abstains."""
    try:
        utilities = {p.id: float(utility(p.body)) for p in slate}
    except Exception as exc:
        logger.warning("utility evaluation failed, abstaining: %s", exc)
        return ABSTAIN
    if any(not math.isfinite(u) for u in utilities.values()):
        return ABSTAIN
    return ballot_from_utilities(utilities, mechanism, budget)


# ----------------------------------------------------------------------
# Policy
# ----------------------------------------------------------------------

_MESSAGES = {
    ScriptedKind.SELFISH: "I propose that I keep as much as possible, since that is what I need.",
    ScriptedKind.EVEN_SPLIT: "I propose an even split so every agent gets the same share.",
    ScriptedKind.CONCESSIVE: "I propose a compromise between my proposal and yours.",
    ScriptedKind.RANDOM: "Here is another idea for the decision.",
}


class ScriptedPolicy:
    """
    Stateless: every decision is a function of the context view, the
    environment and (for RANDOM) a seed derived from (seed, agent, round, phase).
    """

    def __init__(
        self,
        agent: int,
        env: Environment,
        kind: ScriptedKind | str = ScriptedKind.SELFISH,
        *,
        rate: Optional[float] = None,
        seed: int = 0,
    ) -> None:
        self.agent = agent
        self.env = env
        self.kind = ScriptedKind(kind)
        if self.kind is ScriptedKind.CONCESSIVE:
            if rate is None or not 0 < rate <= 1:
                raise ValueError(f"Concessive agents need a rate in (0, 1], got {rate}")
        self.rate = rate
        self.seed = seed

    def __repr__(self) -> str:
        extra = f", rate={self.rate}" if self.rate is not None else ""
        return f"ScriptedPolicy(agent={self.agent}, kind={self.kind.value}{extra})"

    def _rng(self, view: ContextView) -> np.random.Generator:
        return np.random.default_rng(
            [self.seed % 2**63, self.agent, view.round, _PHASE_CODES[view.phase]]
        )

    def _others(self, view: ContextView) -> List[ProposalBody]:
        return [p.body for i, p in sorted(view.latest_proposals.items()) if i != self.agent]

    def intended_body(self, view: ContextView) -> ProposalBody:
        own = view.latest_proposals.get(self.agent)
        if self.kind is ScriptedKind.SELFISH:
            return self.env.selfish_body(self.agent)
        if self.kind is ScriptedKind.EVEN_SPLIT:
            return self.env.even_body(self.agent, self._others(view))
        if self.kind is ScriptedKind.RANDOM:
            return self.env.random_body(self._rng(view), self.agent)
        # concessive: open selfishly, then move toward everyone else
        if own is None:
            return self.env.selfish_body(self.agent)
        return self.env.blend(own.body, self._others(view), float(self.rate))

    async def decide_message(self, view: ContextView) -> MessageAction:
        text = _MESSAGES[self.kind]
        if view.latest_accepted is not None and view.latest_accepted.round == view.round - 1:
            text = f"I accept that the last round selected proposal {view.latest_accepted.proposal.id}. {text}"
        return MessageAction(targets=[], text=text)

    async def decide_proposal(self, view: ContextView) -> ProposalAction:
        body = self.intended_body(view)
        own = view.latest_proposals.get(self.agent)
        if own is not None and own.body.canonical == body.canonical:
            # unchanged: the latest proposal carries over
            return SKIP_PROPOSAL
        return ProposalAction(payload=body.payload, reasoning=f"{self.kind.value} policy")

    async def decide_ballot(
        self, view: ContextView, slate: List[Proposal], mechanism: Mechanism
    ) -> BallotAction:
        ballot = scripted_ballot(lambda body: self.env.utility(self.agent, body), slate, mechanism)
        return BallotAction(ballot=ballot, reasoning=f"{self.kind.value} policy: own utility")


def scripted_roster(
    env: Environment,
    kinds: Sequence[ScriptedKind | str],
    *,
    rates: Optional[Dict[int, float]] = None,
    seed: int = 0,
) -> List[ScriptedPolicy]:
    rates = rates or {}
    return [
        ScriptedPolicy(i, env, kind, rate=rates.get(i), seed=seed) for i, kind in enumerate(kinds)
    ]

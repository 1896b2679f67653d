# backend/app/engine/rounds.py

"""
Round engine: Message -> Proposal -> Voting for R rounds.

Within a phase every policy is queried against the same phase-start snapshot
(queries run concurrently), then results are committed in ascending agent
index. A policy that fails every attempt degrades to skip / abstain.
"""

from __future__ import annotations

import asyncio
import logging
from typing import Awaitable, Callable, Dict, List, Mapping, Optional, Sequence, Tuple, TypeVar

from pydantic import BaseModel, ConfigDict

from app.agents.policy import (
    AgentPolicy,
    AgentPolicyError,
    BallotAction,
    MessageAction,
    ProposalAction,
)
from app.engine.types import (
    AcceptedEntry,
    AgentId,
    ContextView,
    EngineConfig,
    Message,
    Phase,
    PhaseFailure,
    Proposal,
    ProposalBody,
    RoundRecord,
    Transcript,
)
from app.environments.base import Environment, ProposalRejected
from app.social_choice import (
    ABSTAIN,
    Ballot,
    BallotRecord,
    Deferred,
    Outcome,
    Selected,
    Tally,
    is_abstain,
    tally,
    validate_ballot,
)

logger = logging.getLogger(__name__)

SKIPPED_MESSAGE_TEXT = "[no message]"

T = TypeVar("T")


class EngineError(Exception):
    """Run could not start: roster, policies and environment disagree."""

    pass


class RunState(BaseModel):
    """Decision state carried across rounds."""

    model_config = ConfigDict(frozen=True)

    accepted_history: List[AcceptedEntry] = []

    @property
    def latest_accepted(self) -> Optional[AcceptedEntry]:
        return self.accepted_history[-1] if self.accepted_history else None


# ----------------------------------------------------------------------
# Pure round helpers
# ----------------------------------------------------------------------


def assemble_candidates(
    latest_proposals: Mapping[int, Proposal],
    latest_accepted: Optional[Proposal],
) -> List[Proposal]:
    """
    Slate = each agent's most recent proposal plus the latest accepted one,
    deduplicated by canonical body (lowest id kept, authors unioned),
    ordered by ascending id.
    """
    pool: List[Proposal] = list(latest_proposals.values())
    if latest_accepted is not None:
        pool.append(latest_accepted)

    merged: Dict[str, Proposal] = {}
    for proposal in sorted(pool, key=lambda p: p.id):
        key = proposal.body.canonical
        kept = merged.get(key)
        if kept is None:
            merged[key] = proposal
        elif not set(proposal.authors) <= set(kept.authors):
            merged[key] = kept.model_copy(
                update={"authors": sorted(set(kept.authors) | set(proposal.authors))}
            )
    return sorted(merged.values(), key=lambda p: p.id)


def commit_outcome(
    state: RunState, outcome: Outcome, slate: Sequence[Proposal], round_num: int
) -> RunState:
    """Selected appends (round, candidate) to the accepted history; Deferred keeps it."""
    if not isinstance(outcome, Selected):
        return state
    by_id = {p.id: p for p in slate}
    if outcome.candidate not in by_id:
        raise EngineError(f"Outcome selects {outcome.candidate}, which is not on the slate")
    entry = AcceptedEntry(round=round_num, proposal=by_id[outcome.candidate])
    return state.model_copy(update={"accepted_history": [*state.accepted_history, entry]})


def record_ballots(
    config: EngineConfig, slate: Sequence[Proposal], ballots: Mapping[int, Ballot]
) -> Dict[int, BallotRecord]:
    ids = [p.id for p in slate]
    records: Dict[int, BallotRecord] = {}
    for agent in range(config.agent_count):
        ballot = ballots.get(agent, ABSTAIN)
        if is_abstain(ballot):
            records[agent] = BallotRecord(ballot=ballot, status="abstain")
            continue
        check = validate_ballot(
            config.mechanism,
            ids,
            ballot,
            strict_integer_cumulative=config.strict_integer_cumulative,
        )
        if check.valid:
            records[agent] = BallotRecord(ballot=ballot, status="valid")
        else:
            records[agent] = BallotRecord(ballot=ballot, status="disqualified", reason=check.reason)
    return records


# ----------------------------------------------------------------------
# Policy querying
# ----------------------------------------------------------------------


async def _attempt(
    call: Callable[[], Awaitable[T]],
    *,
    agent: int,
    phase: Phase,
    attempts: int,
    check: Optional[Callable[[T], None]] = None,
) -> Tuple[Optional[T], Optional[PhaseFailure]]:
    last_error = "no attempt made"
    for attempt in range(1, attempts + 1):
        try:
            result = await call()
            if check is not None:
                check(result)
            return result, None
        except Exception as exc:  # any policy failure degrades the action
            last_error = f"{type(exc).__name__}: {exc}"
            logger.debug("agent %s %s attempt %s failed: %s", agent, phase, attempt, last_error)

    logger.warning(
        "agent %s degraded in %s phase after %s attempts: %s", agent, phase, attempts, last_error
    )
    return None, PhaseFailure(agent=agent, phase=phase, attempts=attempts, error=last_error)


def _check_message(action: MessageAction) -> None:
    if not isinstance(action, MessageAction):
        raise AgentPolicyError(f"Expected a message action, got {type(action).__name__}")
    if not action.text.strip():
        raise AgentPolicyError("Empty message text")


# ----------------------------------------------------------------------
# Engine
# ----------------------------------------------------------------------


class _Run:
    def __init__(
        self,
        config: EngineConfig,
        agents: Sequence[AgentPolicy],
        env: Environment,
    ) -> None:
        self.config = config
        self.agents = list(agents)
        self.env = env
        self.roster = list(config.agents)

        self.state = RunState()
        self.conversation: List[Message] = []
        self.latest_proposals: Dict[int, Proposal] = {}
        self.latest_reasoning: Dict[int, str] = {}
        self.next_id = 1
        self.rounds: List[RoundRecord] = []

        self._task = env.task_description()
        self._backgrounds = [env.background(a.index) for a in self.roster]
        self._utility_specs = [env.utility_spec(a.index) for a in self.roster]

    # -- snapshots -------------------------------------------------------

    def _snapshot(self, round_num: int, phase: Phase) -> ContextView:
        previous = self.rounds[-1] if self.rounds else None
        latest = self.state.latest_accepted
        shared = dict(self.latest_reasoning) if self.config.share_reasoning else {}
        return ContextView(
            task_description=self._task,
            me=self.roster[0],
            background=self._backgrounds[0],
            utility_spec=self._utility_specs[0],
            roster=self.roster,
            mechanism=self.config.mechanism,
            max_rounds=self.config.rounds,
            round=round_num,
            phase=phase,
            conversation=list(self.conversation),
            latest_proposals=dict(self.latest_proposals),
            latest_slate=list(previous.slate) if previous else [],
            latest_slate_round=previous.round if previous else None,
            latest_votes=dict(previous.ballots) if previous else {},
            latest_outcome=previous.outcome if previous else None,
            latest_vote_round=previous.round if previous else None,
            latest_accepted=latest,
            shared_reasoning=shared,
        )

    def _view_for(self, snapshot: ContextView, agent: int) -> ContextView:
        return snapshot.model_copy(
            update={
                "me": self.roster[agent],
                "background": self._backgrounds[agent],
                "utility_spec": self._utility_specs[agent],
                "shared_reasoning": {
                    k: v for k, v in snapshot.shared_reasoning.items() if k != agent
                },
            }
        )

    # -- phases ----------------------------------------------------------

    async def _message_phase(self, round_num: int, failures: List[PhaseFailure]) -> List[Message]:
        snapshot = self._snapshot(round_num, "message")
        results = await asyncio.gather(
            *[
                _attempt(
                    lambda p=policy, v=self._view_for(snapshot, i): p.decide_message(v),
                    agent=i,
                    phase="message",
                    attempts=self.config.max_attempts,
                    check=_check_message,
                )
                for i, policy in enumerate(self.agents)
            ]
        )

        messages: List[Message] = []
        for i, (action, failure) in enumerate(results):
            sender = self.roster[i]
            others = [a for a in self.roster if a.index != i]
            if action is None:
                failures.append(failure)
                messages.append(
                    Message(sender=sender, targets=others, text=SKIPPED_MESSAGE_TEXT, skipped=True)
                )
                continue
            targets = self._resolve_targets(i, action.targets)
            messages.append(Message(sender=sender, targets=targets, text=action.text))
        return messages

    def _resolve_targets(self, sender: int, indices: Sequence[int]) -> List[AgentId]:
        wanted = sorted({t for t in indices if 0 <= t < len(self.roster) and t != sender})
        if not wanted:
            return [a for a in self.roster if a.index != sender]
        return [self.roster[t] for t in wanted]

    async def _proposal_phase(
        self, round_num: int, failures: List[PhaseFailure]
    ) -> Tuple[Dict[int, Optional[Proposal]], Dict[int, Optional[str]]]:
        snapshot = self._snapshot(round_num, "proposal")
        results = await asyncio.gather(
            *[
                _attempt(
                    lambda p=policy, v=self._view_for(snapshot, i): p.decide_proposal(v),
                    agent=i,
                    phase="proposal",
                    attempts=self.config.max_attempts,
                )
                for i, policy in enumerate(self.agents)
            ]
        )

        bodies: Dict[int, ProposalBody] = {}
        reasoning: Dict[int, Optional[str]] = {}
        for i, (action, failure) in enumerate(results):
            if action is None:
                failures.append(failure)
                reasoning[i] = None
                continue
            reasoning[i] = action.reasoning
            if action.payload is None:
                continue
            try:
                bodies[i] = self.env.parse_body(action.payload)
            except ProposalRejected as exc:
                logger.warning("agent %s proposal rejected in round %s: %s", i, round_num, exc)

        # identical bodies proposed in the same round become one proposal
        groups: Dict[str, List[int]] = {}
        for i in sorted(bodies):
            groups.setdefault(bodies[i].canonical, []).append(i)

        new: Dict[int, Optional[Proposal]] = {i: None for i in range(len(self.roster))}
        for canonical, authors in groups.items():
            proposal = Proposal(
                id=self.next_id, round=round_num, authors=authors, body=bodies[authors[0]]
            )
            self.next_id += 1
            for i in authors:
                new[i] = proposal
        return new, reasoning

    async def _voting_phase(
        self, round_num: int, slate: List[Proposal], failures: List[PhaseFailure]
    ) -> Tuple[Dict[int, Ballot], Dict[int, Optional[str]]]:
        snapshot = self._snapshot(round_num, "voting")
        mechanism = self.config.mechanism
        results = await asyncio.gather(
            *[
                _attempt(
                    lambda p=policy, v=self._view_for(snapshot, i): p.decide_ballot(
                        v, list(slate), mechanism
                    ),
                    agent=i,
                    phase="voting",
                    attempts=self.config.max_attempts,
                )
                for i, policy in enumerate(self.agents)
            ]
        )

        ballots: Dict[int, Ballot] = {}
        reasoning: Dict[int, Optional[str]] = {}
        for i, (action, failure) in enumerate(results):
            if action is None:
                failures.append(failure)
                ballots[i] = ABSTAIN
                reasoning[i] = None
                continue
            ballots[i] = action.ballot
            reasoning[i] = action.reasoning
        return ballots, reasoning

    # -- loop ------------------------------------------------------------

    async def play_round(self, round_num: int) -> RoundRecord:
        failures: List[PhaseFailure] = []

        messages = await self._message_phase(round_num, failures)
        self.conversation.extend(messages)

        new_proposals, reasoning = await self._proposal_phase(round_num, failures)
        for i, proposal in new_proposals.items():
            if proposal is not None:
                self.latest_proposals[i] = proposal
                if reasoning.get(i):
                    self.latest_reasoning[i] = reasoning[i]

        latest = self.state.latest_accepted
        slate = assemble_candidates(self.latest_proposals, latest.proposal if latest else None)

        tally_summary: Optional[Tally] = None
        vote_reasoning: Dict[int, Optional[str]] = {}
        if not slate:
            ballots: Dict[int, Ballot] = {i: ABSTAIN for i in range(len(self.roster))}
            outcome: Outcome = Deferred(reason="empty_slate")
        else:
            ballots, vote_reasoning = await self._voting_phase(round_num, slate, failures)
            result = tally(
                self.config.mechanism,
                [p.id for p in slate],
                ballots,
                self.config.agent_count,
                strict_integer_cumulative=self.config.strict_integer_cumulative,
            )
            outcome, tally_summary = result.outcome, result.tally

        self.state = commit_outcome(self.state, outcome, slate, round_num)
        logger.debug("round %s outcome %s (slate %s)", round_num, outcome, [p.id for p in slate])

        record = RoundRecord(
            round=round_num,
            messages=messages,
            new_proposals=new_proposals,
            slate=slate,
            ballots=record_ballots(self.config, slate, ballots),
            outcome=outcome,
            tally=tally_summary,
            reasoning=reasoning,
            vote_reasoning=vote_reasoning,
            failures=failures,
        )
        self.rounds.append(record)
        return record

    def transcript(self, simulation_id: str) -> Transcript:
        history = self.state.accepted_history
        return Transcript(
            simulation_id=simulation_id,
            config=self.config,
            seed=self.config.seed,
            rounds=self.rounds,
            accepted_history=history,
            final_decision=history[-1].proposal if history else None,
        )


async def run_collaboration(
    config: EngineConfig,
    agents: Sequence[AgentPolicy],
    env: Environment,
    *,
    simulation_id: Optional[str] = None,
) -> Transcript:
    """
    Play `config.rounds` rounds and return the full transcript.

    The result depends only on (config, policies, seed): policies see the
    phase-start snapshot and commits happen in agent order.
    """
    k = config.agent_count
    if len(agents) != k:
        raise EngineError(f"Config names {k} agents but {len(agents)} policies were given")
    if env.agent_count != k:
        raise EngineError(f"Environment '{env.env_id}' holds {env.agent_count} agents, config {k}")

    run = _Run(config, agents, env)
    for round_num in range(1, config.rounds + 1):
        await run.play_round(round_num)

    transcript = run.transcript(simulation_id or f"sim-{config.seed}")
    logger.debug(
        "%s finished: %s acceptances", transcript.simulation_id, len(transcript.accepted_history)
    )
    return transcript

# backend/app/agents/prompts.py

"""
Prompt templates for the model-backed agent.

Templates use `$name` placeholders (string.Template) because the bodies are
full of literal JSON braces. Rendering with an unbound placeholder raises
PromptConfigError instead of leaking a `$name` into the prompt.
"""

from __future__ import annotations

from string import Template
from typing import Any, Dict, List, Mapping, Optional, Sequence

from app.agents.policy import PromptConfigError
from app.engine.types import ContextView, Message, Proposal
from app.social_choice import (
    BallotRecord,
    Cumulative,
    Deferred,
    Mechanism,
    Ranked,
    Rated,
    Selected,
    SingleChoice,
    cumulative_budget,
)

MECHANISM_DESCRIPTIONS: Dict[Mechanism, str] = {
    Mechanism.UNANIMOUS: (
        "The proposal that receives votes from all agents will be selected. If no proposal "
        "receives votes from all agents, no proposal will be selected."
    ),
    Mechanism.MAJORITY: (
        "The proposal that receives votes from more than half of all agents will be selected. "
        "If no proposal meets this condition, none will be selected."
    ),
    Mechanism.PLURALITY: "The proposal that receives the most votes will be selected.",
    Mechanism.RATED: (
        "Each agent assigns ratings on a 5-point Likert scale to all candidate proposals, with 1 "
        "being the lowest and 5 being the highest. The proposal with the highest total score "
        "will be selected."
    ),
    Mechanism.RANKED: (
        "Each agent ranks all candidate proposals from the most preferred to the least "
        "preferred. Social Choice will assign 1, 1/2, 1/3... points to the 1st, 2nd, 3rd... "
        "candidates on each ballot. The proposal with the highest total points will be selected."
    ),
    Mechanism.CUMULATIVE: (
        "For X candidate proposals, each agent is given X points to distribute among the "
        "proposals as they see fit. The proposal with the highest total points will be selected."
    ),
}

MECHANISM_NAMES: Dict[Mechanism, str] = {
    Mechanism.UNANIMOUS: "Unanimous Voting",
    Mechanism.MAJORITY: "Majority Voting",
    Mechanism.PLURALITY: "Plurality Voting",
    Mechanism.RATED: "Rated Voting",
    Mechanism.RANKED: "Ranked Voting",
    Mechanism.CUMULATIVE: "Cumulative Voting",
}

JSON_ONLY = "Don't generate anything except the JSON format."

INITIALIZATION = """# Agent Initialization
You are $my_name, an agent in a recurring collaboration environment designed to address and solve complex problems.

# Task Description
$task_description

# Collaboration Rules
You start with nothing decided. The intermediate result will be decided by the social choice function at the end of each round.
In each round, the collaboration runs in 3 phases with the following order:
1. Message Phase: At the beginning of each round, you can send one message to a shared channel for either Talking to one or more agents. All agents will send messages simultaneously. You will be able to see all messages from all agents after the end of the message phase.
2. Proposal Phase: After the end of the message phase, you will have the opportunity to propose potential solution. If you don't propose in this phase, your latest proposal will be used for voting.
3. Voting Phase: At the end of the round, all agents' latest proposal will be voted. When agents didn't propose in this round, their latest proposal will be used for voting. All votes will be processed with the social choice function: $name_of_social_choice, where $explanation_of_social_choice If the social choice function selects a proposal, the intermediate result will be updated accordingly.
After each round, each agent will be able to see the result of the vote from the previous round and the conversation history from all rounds.

The collaboration will run for $max_rounds rounds. After the last round, the latest result will be the final result.

# Your Background
$my_agent_background

# Game History
## Latest Candidates at Round $latest_candidates_round:
$latest_candidates

## Latest Voting Result at Round $vote_history_length:
$latest_vote_history

## Latest Approved Proposal:
$latest_approved_proposal

## Conversation History until Round $conversation_history_length:
$conversation_history"""

APPROVED_PROPOSAL = """Proposal $latest_approved_proposal_id from Round $latest_approved_proposal_round.

Proposal $latest_approved_proposal_id Detail:
$latest_approved_proposal_detail"""

MESSAGE_PHASE = """You are $my_name, currently in the message phase of round $round_num. In this phase, you can:
1. Answer questions posed by others.
2. Share your findings or insights.
3. Ask questions to further the discussion.
You may engage in multiple activities using multiple sentences.

Please type your message in the following JSON format: {"target":  <list of agent names>, "message": <str, your message>}
Don't generate anything except the JSON format."""

PROPOSAL_PHASE = """You are $my_name, currently in the proposal phase of round $round_num. You have an opportunity to make a proposal of the potential solution. Whether or not you submit a new proposal, your latest proposal will be considered as a candidate proposal for the voting phase.

You have two options:
1. Make a proposal:
    - You can propose a potential solution by the provided format.
2. Do not make a proposal:
    - If you do not want to propose a solution, you can return None as your proposal.

Please type your proposal in the following JSON format: {"reason_for_decision": <your step by step reasoning for your decision>, "proposal": $proposal_format_text, or None}
Don't generate anything except the JSON format."""

_VOTING_PREAMBLE = """You are $my_name, at the voting phase at round $round_num.
In this phase, all agents' latest proposal will be voted by $name_of_social_choice, where $explanation_of_social_choice If the social choice function selects a proposal, the intermediate result will be updated accordingly.
"""

_CANDIDATES = """The current candidate proposals are as follows:
$proposal_list
"""

VOTE_BASED = (
    _VOTING_PREAMBLE
    + """
You have two actions to choose: vote or not vote.
1. For vote:
    - You can only vote for one of the proposals from the candidate list.
2. For not vote:
    - You should vote None.
    - If you do not want to vote for any of the proposals, you can vote None.
    - If there is no proposal, you vote None.

The same proposal proposed by multiple agents will be merged as one proposal.
If there are multiple proposals passed, none of the proposals will be selected.
If no proposals are passed, the current intermediate result will be kept.

"""
    + _CANDIDATES
    + """
What is your vote? Please answer in the following JSON format: {"reason_for_decision": <your step by step reasoning for your decision>, "decision": <id of the proposal from the candidates you want to vote, or None>}
Don't generate anything except the JSON format."""
)

RATED = (
    _VOTING_PREAMBLE
    + """
You have two actions to choose: rate or not rate.
1. For rate:
    - You should rate every proposal from the candidate list with an integer from 1 to 5.
2. For not rate:
    - If you do not want to rate the proposals, you can answer None.
    - If there is no proposal, you answer None.

The same proposal proposed by multiple agents will be merged as one proposal.
If no proposals are passed, the current intermediate result will be kept.

"""
    + _CANDIDATES
    + """
What are your ratings? Please answer in the following JSON format: {"reason_for_decision": <your step by step reasoning for your decision>, "decision": <{"<proposal id>": <integer from 1 to 5>, ...} covering every candidate, or None>}
Don't generate anything except the JSON format."""
)

RANKED = (
    _VOTING_PREAMBLE
    + """
You have two actions to choose: rank or not rank.
1. For rank:
    - You should rank every proposal from the candidate list, from the most preferred to the least preferred.
2. For not rank:
    - If you do not want to rank the proposals, you can answer None.
    - If there is no proposal, you answer None.

The same proposal proposed by multiple agents will be merged as one proposal.
If no proposals are passed, the current intermediate result will be kept.

"""
    + _CANDIDATES
    + """
What is your ranking? Please answer in the following JSON format: {"reason_for_decision": <your step by step reasoning for your decision>, "decision": <[<proposal id>, ...] listing every candidate from the most preferred to the least preferred, or None>}
Don't generate anything except the JSON format."""
)

CUMULATIVE = (
    _VOTING_PREAMBLE
    + """
You have two actions to choose: distribute points or not distribute points.
1. For distribute points:
    - You have $budget points in total and should distribute all of them among the proposals from the candidate list.
2. For not distribute points:
    - If you do not want to support any of the proposals, you can answer None.
    - If there is no proposal, you answer None.

The same proposal proposed by multiple agents will be merged as one proposal.
If no proposals are passed, the current intermediate result will be kept.

"""
    + _CANDIDATES
    + """
How do you distribute your points? Please answer in the following JSON format: {"reason_for_decision": <your step by step reasoning for your decision>, "decision": <{"<proposal id>": <points>, ...} summing to $budget, or None>}
Don't generate anything except the JSON format."""
)

TEMPLATES: Dict[str, str] = {
    "initialization": INITIALIZATION,
    "approved_proposal": APPROVED_PROPOSAL,
    "message_phase": MESSAGE_PHASE,
    "proposal_phase": PROPOSAL_PHASE,
}

VOTING_TEMPLATES: Dict[Mechanism, str] = {
    Mechanism.UNANIMOUS: VOTE_BASED,
    Mechanism.MAJORITY: VOTE_BASED,
    Mechanism.PLURALITY: VOTE_BASED,
    Mechanism.RATED: RATED,
    Mechanism.RANKED: RANKED,
    Mechanism.CUMULATIVE: CUMULATIVE,
}


def render_prompt(
    template_id: str,
    variables: Mapping[str, Any],
    *,
    mechanism: Optional[Mechanism] = None,
) -> str:
    """
    Fill a template. `voting_phase` needs the mechanism; its name and
    description are bound automatically unless given explicitly.
    """
    values = {k: str(v) for k, v in variables.items()}

    if template_id == "voting_phase":
        if mechanism is None:
            raise PromptConfigError("voting_phase needs a mechanism")
        values.setdefault("name_of_social_choice", MECHANISM_NAMES[mechanism])
        values.setdefault("explanation_of_social_choice", MECHANISM_DESCRIPTIONS[mechanism])
        template = VOTING_TEMPLATES[mechanism]
    else:
        try:
            template = TEMPLATES[template_id]
        except KeyError:
            valid = ", ".join([*TEMPLATES, "voting_phase"])
            raise PromptConfigError(f"Unknown template '{template_id}'. Valid: {valid}") from None

    try:
        return Template(template).substitute(values)
    except KeyError as exc:
        raise PromptConfigError(f"Template '{template_id}' needs variable {exc.args[0]!r}") from None
    except ValueError as exc:
        raise PromptConfigError(f"Template '{template_id}' is malformed: {exc}") from None


# ----------------------------------------------------------------------
# Context rendering
# ----------------------------------------------------------------------


def _authors(view: ContextView, proposal: Proposal) -> str:
    return ", ".join(view.name_of(a) for a in proposal.authors)


def render_candidates(view: ContextView, slate: Sequence[Proposal], describe) -> str:
    if not slate:
        return "None"
    blocks = []
    for p in slate:
        blocks.append(f"Proposal {p.id} (proposed by {_authors(view, p)}):\n{describe(p.body)}")
    return "\n\n".join(blocks)


def _ballot_text(record: BallotRecord) -> str:
    ballot = record.ballot
    if record.status == "abstain":
        return "None"
    if isinstance(ballot, SingleChoice):
        text = f"Proposal {ballot.candidate}"
    elif isinstance(ballot, Rated):
        text = ", ".join(f"Proposal {c}: {s}" for c, s in sorted(ballot.scores.items()))
    elif isinstance(ballot, Ranked):
        text = " > ".join(f"Proposal {c}" for c in ballot.order)
    elif isinstance(ballot, Cumulative):
        text = ", ".join(f"Proposal {c}: {p:g}" for c, p in sorted(ballot.points.items()))
    else:
        text = "None"
    if record.status == "disqualified":
        text += f" (disqualified: {record.reason})"
    return text


def render_votes(view: ContextView) -> str:
    if view.latest_vote_round is None:
        return "None"
    lines = [
        f"{view.name_of(agent)}: {_ballot_text(record)}"
        for agent, record in sorted(view.latest_votes.items())
    ]
    outcome = view.latest_outcome
    if isinstance(outcome, Selected):
        lines.append(f"Result: Proposal {outcome.candidate} was selected.")
    elif isinstance(outcome, Deferred):
        lines.append("Result: No proposal was selected.")
    return "\n".join(lines)


def render_conversation(view: ContextView, messages: Optional[Sequence[Message]] = None) -> str:
    messages = view.conversation if messages is None else messages
    if not messages:
        return "None"
    per_round = max(1, len(view.roster))
    lines: List[str] = []
    for n, m in enumerate(messages):
        round_num = n // per_round + 1
        targets = ", ".join(t.display_name for t in m.targets)
        lines.append(f"[Round {round_num}] {m.sender.display_name} to {targets}: {m.text}")
    return "\n".join(lines)


def conversation_rounds(view: ContextView) -> int:
    return len(view.conversation) // max(1, len(view.roster))


def initialization_prompt(view: ContextView, describe) -> str:
    accepted = view.latest_accepted
    if accepted is None:
        approved = "None"
    else:
        approved = render_prompt(
            "approved_proposal",
            {
                "latest_approved_proposal_id": accepted.proposal.id,
                "latest_approved_proposal_round": accepted.round,
                "latest_approved_proposal_detail": describe(accepted.proposal.body),
            },
        )
    background = view.background
    if view.utility_spec and view.utility_spec not in background:
        background = f"{background}\n{view.utility_spec}"

    return render_prompt(
        "initialization",
        {
            "my_name": view.me.display_name,
            "task_description": view.task_description,
            "name_of_social_choice": MECHANISM_NAMES[view.mechanism],
            "explanation_of_social_choice": MECHANISM_DESCRIPTIONS[view.mechanism],
            "max_rounds": view.max_rounds,
            "my_agent_background": background,
            "latest_candidates_round": view.latest_slate_round if view.latest_slate_round else "None",
            "latest_candidates": render_candidates(view, view.latest_slate, describe),
            "vote_history_length": view.latest_vote_round if view.latest_vote_round else "None",
            "latest_vote_history": render_votes(view),
            "latest_approved_proposal": approved,
            "conversation_history_length": conversation_rounds(view),
            "conversation_history": render_conversation(view),
        },
    )


def voting_prompt(view: ContextView, slate: Sequence[Proposal], describe) -> str:
    variables: Dict[str, Any] = {
        "my_name": view.me.display_name,
        "round_num": view.round,
        "proposal_list": render_candidates(view, slate, describe),
    }
    if view.mechanism is Mechanism.CUMULATIVE:
        variables["budget"] = f"{cumulative_budget(max(1, len(slate))):g}"
    return render_prompt("voting_phase", variables, mechanism=view.mechanism)

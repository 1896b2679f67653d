# backend/tests/test_agents.py

import pytest

from app.agents.policy import (
    BallotAction,
    MessageAction,
    PromptConfigError,
    ProposalAction,
    ReplyParseError,
)
from app.agents.prompts import initialization_prompt, render_prompt, voting_prompt
from app.agents.replies import extract_json_object, parse_agent_reply, serialize_action
from app.agents.scripted import ScriptedKind, ScriptedPolicy, ballot_from_utilities, scripted_ballot
from app.engine.types import ContextView, Proposal, ProposalBody
from app.environments.economy import EconomyEnvironment, UtilitySetPreset
from app.social_choice import (
    ABSTAIN,
    Cumulative,
    Mechanism,
    Ranked,
    Rated,
    SingleChoice,
    is_abstain,
)

from builders import roster

ROSTER = roster(3)


def view_for(env, agent=0, *, mechanism=Mechanism.MAJORITY, round_num=1, phase="proposal", rounds=10):
    ids = env.agent_ids()
    return ContextView(
        task_description=env.task_description(),
        me=ids[agent],
        background=env.background(agent),
        utility_spec=env.utility_spec(agent),
        roster=ids,
        mechanism=mechanism,
        max_rounds=rounds,
        round=round_num,
        phase=phase,
        conversation=[],
        latest_proposals={},
        latest_slate=[],
    )


# ----------------------------------------------------------------------
# Reply parsing
# ----------------------------------------------------------------------


def test_bare_none_decision_abstains():
    action = parse_agent_reply("voting", Mechanism.MAJORITY, '{"reason_for_decision": "none fit", "decision": None}')
    assert is_abstain(action.ballot)
    assert action.reasoning == "none fit"


def test_json_is_found_inside_chatter():
    action = parse_agent_reply("voting", Mechanism.PLURALITY, 'Sure! {"decision": 3} Hope that helps.')
    assert action.ballot == SingleChoice(candidate=3)


def test_message_targets_resolve_to_indices():
    raw = '{"target": ["Agent 2", "Nobody"], "message": "Can you give me more of Good 1?"}'
    action = parse_agent_reply("message", Mechanism.MAJORITY, raw, ROSTER)
    assert action.targets == [1]
    assert action.text.startswith("Can you")


def test_message_needs_text():
    with pytest.raises(ReplyParseError):
        parse_agent_reply("message", Mechanism.MAJORITY, '{"target": []}', ROSTER)


def test_proposal_none_is_a_skip():
    action = parse_agent_reply("proposal", Mechanism.MAJORITY, '{"reason_for_decision": "wait", "proposal": "None"}')
    assert action.skipped


def test_proposal_needs_reasoning_field():
    with pytest.raises(ReplyParseError):
        parse_agent_reply("proposal", Mechanism.MAJORITY, '{"proposal": {"rating": 4}}')


def test_ranked_decision_accepts_proposal_labels():
    action = parse_agent_reply("voting", Mechanism.RANKED, '{"decision": ["Proposal 2", 1]}')
    assert action.ballot == Ranked(order=[2, 1])


def test_rated_decision_rejects_fractions():
    with pytest.raises(ReplyParseError):
        parse_agent_reply("voting", Mechanism.RATED, '{"decision": {"1": 4.5}}')


@pytest.mark.parametrize("literal", ["NaN", "Infinity", "-Infinity"])
def test_cumulative_decision_rejects_non_finite_points(literal):
    raw = '{"decision": {"1": %s, "2": 2}}' % literal
    with pytest.raises(ReplyParseError):
        parse_agent_reply("voting", Mechanism.CUMULATIVE, raw)


def test_reply_without_json_fails():
    with pytest.raises(ReplyParseError):
        extract_json_object("I vote for proposal 2.")


@pytest.mark.parametrize(
    "phase, mechanism, action",
    [
        ("message", Mechanism.MAJORITY, MessageAction(targets=[0, 2], text="Agreed.")),
        ("proposal", Mechanism.MAJORITY, ProposalAction(payload={"rating": 4.0}, reasoning="avg")),
        ("voting", Mechanism.RATED, BallotAction(ballot=Rated(scores={1: 5, 2: 2}), reasoning="r")),
        ("voting", Mechanism.CUMULATIVE, BallotAction(ballot=Cumulative(points={1: 1.5, 2: 0.5}), reasoning="c")),
        ("voting", Mechanism.UNANIMOUS, BallotAction(ballot=ABSTAIN, reasoning="")),
    ],
)
def test_serialized_actions_parse_back(phase, mechanism, action):
    parsed = parse_agent_reply(phase, mechanism, serialize_action(action, ROSTER), ROSTER)
    if isinstance(action, BallotAction):
        assert parsed.ballot == action.ballot or (is_abstain(action.ballot) and is_abstain(parsed.ballot))
    elif isinstance(action, MessageAction):
        assert parsed == action
    else:
        assert parsed.payload == action.payload


# ----------------------------------------------------------------------
# Prompts
# ----------------------------------------------------------------------


def test_message_prompt():
    text = render_prompt("message_phase", {"my_name": "Agent 1", "round_num": 2})
    assert text.startswith("You are Agent 1, currently in the message phase of round 2.")
    assert "Please type your message in the following JSON format" in text


def test_voting_prompt_binds_mechanism_text():
    text = render_prompt(
        "voting_phase",
        {"my_name": "Agent 2", "round_num": 1, "proposal_list": "Proposal 1"},
        mechanism=Mechanism.RATED,
    )
    assert "Rated Voting" in text
    assert "5-point Likert scale" in text


def test_unbound_variable_is_a_config_error():
    with pytest.raises(PromptConfigError):
        render_prompt("message_phase", {"my_name": "Agent 1"})
    with pytest.raises(PromptConfigError):
        render_prompt("voting_phase", {"my_name": "Agent 1", "round_num": 1, "proposal_list": ""})
    with pytest.raises(PromptConfigError):
        render_prompt("no_such_template", {})


def test_initialization_prompt_carries_background():
    env = EconomyEnvironment(UtilitySetPreset.UNIFORM, 3)
    text = initialization_prompt(view_for(env, 1), env.describe_body)
    assert "You are Agent 2," in text
    assert "will run for 10 rounds" in text
    assert env.utility_spec(1) in text


def test_cumulative_voting_prompt_states_the_budget():
    env = EconomyEnvironment(UtilitySetPreset.UNIFORM, 2)
    slate = [
        Proposal(id=1, round=1, authors=[0], body=env.selfish_body(0)),
        Proposal(id=2, round=1, authors=[1], body=env.selfish_body(1)),
    ]
    text = voting_prompt(view_for(env, mechanism=Mechanism.CUMULATIVE, phase="voting"), slate, env.describe_body)
    assert "You have 2 points in total" in text
    assert "Proposal 2 (proposed by Agent 2)" in text


# ----------------------------------------------------------------------
# Scripted agents
# ----------------------------------------------------------------------


def test_one_vote_ballot_is_the_argmax():
    assert ballot_from_utilities({1: 10, 2: 30}, Mechanism.PLURALITY) == SingleChoice(candidate=2)


def test_cumulative_ballot_is_proportional():
    ballot = ballot_from_utilities({1: 10, 2: 30}, Mechanism.CUMULATIVE, 2)
    assert ballot.points == pytest.approx({1: 0.5, 2: 1.5})


def test_ranked_ties_break_by_id():
    assert ballot_from_utilities({2: 5, 1: 5}, Mechanism.RANKED) == Ranked(order=[1, 2])


def test_rated_ballot_scales_onto_likert():
    assert ballot_from_utilities({1: 0, 2: 10, 3: 5}, Mechanism.RATED) == Rated(scores={1: 1, 2: 5, 3: 3})


def test_scripted_ballot_abstains_when_utility_fails():
    body = ProposalBody.from_payload({"rating": 4})
    slate = [Proposal(id=1, round=1, authors=[0], body=body)]

    def broken(_body):
        raise KeyError("allocation")

    assert is_abstain(scripted_ballot(broken, slate, Mechanism.MAJORITY))


def test_empty_utilities_abstain():
    assert is_abstain(ballot_from_utilities({}, Mechanism.MAJORITY))


async def test_random_agent_is_reproducible_per_seed():
    env = EconomyEnvironment(UtilitySetPreset.UNIFORM, 3)
    view = view_for(env, 2, round_num=4)
    a = await ScriptedPolicy(2, env, ScriptedKind.RANDOM, seed=11).decide_proposal(view)
    b = await ScriptedPolicy(2, env, ScriptedKind.RANDOM, seed=11).decide_proposal(view)
    c = await ScriptedPolicy(2, env, ScriptedKind.RANDOM, seed=12).decide_proposal(view)
    assert a == b
    assert a.payload != c.payload


async def test_selfish_agent_votes_for_itself():
    env = EconomyEnvironment(UtilitySetPreset.UNIFORM, 2)
    slate = [
        Proposal(id=1, round=1, authors=[0], body=env.selfish_body(0)),
        Proposal(id=2, round=1, authors=[1], body=env.selfish_body(1)),
    ]
    agent = ScriptedPolicy(1, env, ScriptedKind.SELFISH)
    action = await agent.decide_ballot(view_for(env, 1, phase="voting"), slate, Mechanism.MAJORITY)
    assert action.ballot == SingleChoice(candidate=2)

# backend/app/agents/replies.py

from __future__ import annotations

import json
import math
import re
from typing import Any, Dict, List, Optional, Sequence, Union

from pydantic import ValidationError

from app.agents.policy import BallotAction, MessageAction, ProposalAction, ReplyParseError
from app.engine.types import AgentId, Phase
from app.social_choice import (
    ABSTAIN,
    Ballot,
    Cumulative,
    Mechanism,
    Ranked,
    Rated,
    SingleChoice,
    is_abstain,
)

Action = Union[MessageAction, ProposalAction, BallotAction]

_BARE_NONE = re.compile(r"(?<![\"\w])None(?![\"\w])")
_ID_IN_TEXT = re.compile(r"-?\d+")


def _balanced_blocks(raw: str):
    """Yield every top-level-or-nested {...} span, in order of its opening brace."""
    for start, ch in enumerate(raw):
        if ch != "{":
            continue
        depth = 0
        in_str = False
        escaped = False
        for end in range(start, len(raw)):
            c = raw[end]
            if in_str:
                if escaped:
                    escaped = False
                elif c == "\\":
                    escaped = True
                elif c == '"':
                    in_str = False
                continue
            if c == '"':
                in_str = True
            elif c == "{":
                depth += 1
            elif c == "}":
                depth -= 1
                if depth == 0:
                    yield raw[start : end + 1]
                    break


def extract_json_object(raw: str) -> Dict[str, Any]:
    """First balanced brace block that parses as a JSON object (bare None read as null)."""
    for block in _balanced_blocks(raw):
        for candidate in (block, _BARE_NONE.sub("null", block)):
            try:
                value = json.loads(candidate)
            except json.JSONDecodeError:
                continue
            if isinstance(value, dict):
                return value
    raise ReplyParseError("No JSON object found in reply")


def _is_none(value: Any) -> bool:
    return value is None or (isinstance(value, str) and value.strip().lower() in {"none", "null", ""})


def _as_id(value: Any) -> int:
    if isinstance(value, bool):
        raise ReplyParseError(f"Not a proposal id: {value!r}")
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    if isinstance(value, str):
        m = _ID_IN_TEXT.search(value)
        if m:
            return int(m.group(0))
    raise ReplyParseError(f"Not a proposal id: {value!r}")


def _name_index(roster: Sequence[AgentId]) -> Dict[str, int]:
    return {a.display_name.strip().lower(): a.index for a in roster}


def _parse_message(obj: Dict[str, Any], roster: Sequence[AgentId]) -> MessageAction:
    text = obj.get("message")
    if not isinstance(text, str) or not text.strip():
        raise ReplyParseError("Message reply needs a non-empty 'message' string")
    raw_targets = obj.get("target", obj.get("targets", []))
    if isinstance(raw_targets, str):
        raw_targets = [raw_targets]
    if not isinstance(raw_targets, list):
        raise ReplyParseError("'target' must be a list of agent names")
    names = _name_index(roster)
    targets: List[int] = []
    for t in raw_targets:
        idx = names.get(str(t).strip().lower())
        # unknown names are dropped; an empty list later means everyone else
        if idx is not None and idx not in targets:
            targets.append(idx)
    return MessageAction(targets=targets, text=text)


def _parse_proposal(obj: Dict[str, Any]) -> ProposalAction:
    if "proposal" not in obj:
        raise ReplyParseError("Proposal reply needs a 'proposal' field")
    if "reason_for_decision" not in obj:
        raise ReplyParseError("Proposal reply needs a 'reason_for_decision' field")
    reasoning = obj["reason_for_decision"]
    reasoning = None if reasoning is None else str(reasoning)
    payload = obj["proposal"]
    if _is_none(payload):
        return ProposalAction(payload=None, reasoning=reasoning)
    return ProposalAction(payload=payload, reasoning=reasoning)


def _parse_ballot(mechanism: Mechanism, decision: Any) -> Ballot:
    if _is_none(decision):
        return ABSTAIN
    try:
        if mechanism.is_one_vote:
            return SingleChoice(candidate=_as_id(decision))
        if mechanism is Mechanism.RANKED:
            if not isinstance(decision, list):
                raise ReplyParseError("Ranked decision must be a list of proposal ids")
            return Ranked(order=[_as_id(c) for c in decision])
        if not isinstance(decision, dict):
            raise ReplyParseError(f"{mechanism.value} decision must map proposal ids to numbers")
        if mechanism is Mechanism.RATED:
            scores: Dict[int, int] = {}
            for key, score in decision.items():
                if isinstance(score, bool) or not isinstance(score, (int, float)):
                    raise ReplyParseError(f"Rating for {key!r} is not a number")
                if isinstance(score, float) and not score.is_integer():
                    raise ReplyParseError(f"Rating for {key!r} is not an integer")
                scores[_as_id(key)] = int(score)
            return Rated(scores=scores)
        points: Dict[int, float] = {}
        for key, pts in decision.items():
            if isinstance(pts, bool) or not isinstance(pts, (int, float)):
                raise ReplyParseError(f"Points for {key!r} are not a number")
            if not math.isfinite(pts):
                raise ReplyParseError(f"Points for {key!r} are not finite")
            points[_as_id(key)] = float(pts)
        return Cumulative(points=points)
    except ValidationError as exc:
        raise ReplyParseError(f"Malformed {mechanism.value} decision: {exc}") from None


def parse_agent_reply(
    phase: Phase,
    mechanism: Mechanism,
    raw: str,
    roster: Sequence[AgentId] = (),
) -> Action:
    """
    Provider text -> structured action. Anything unusable raises ReplyParseError,
    which the engine turns into a retry (and eventually skip / abstain).
    """
    obj = extract_json_object(raw or "")
    if phase == "message":
        return _parse_message(obj, roster)
    if phase == "proposal":
        return _parse_proposal(obj)
    if "decision" not in obj:
        raise ReplyParseError("Voting reply needs a 'decision' field")
    reasoning = obj.get("reason_for_decision")
    return BallotAction(
        ballot=_parse_ballot(mechanism, obj["decision"]),
        reasoning=None if reasoning is None else str(reasoning),
    )


def serialize_action(action: Action, roster: Sequence[AgentId] = ()) -> str:
    """Inverse of parse_agent_reply for well-formed actions."""
    if isinstance(action, MessageAction):
        names = {a.index: a.display_name for a in roster}
        return json.dumps({"target": [names[t] for t in action.targets], "message": action.text})

    if isinstance(action, ProposalAction):
        return json.dumps(
            {
                "reason_for_decision": action.reasoning or "",
                "proposal": "None" if action.payload is None else action.payload,
            }
        )

    ballot = action.ballot
    decision: Optional[Any]
    if is_abstain(ballot):
        decision = "None"
    elif isinstance(ballot, SingleChoice):
        decision = ballot.candidate
    elif isinstance(ballot, Ranked):
        decision = list(ballot.order)
    elif isinstance(ballot, Rated):
        decision = {str(c): s for c, s in ballot.scores.items()}
    elif isinstance(ballot, Cumulative):
        decision = {str(c): p for c, p in ballot.points.items()}
    else:
        decision = "None"
    return json.dumps({"reason_for_decision": action.reasoning or "", "decision": decision})

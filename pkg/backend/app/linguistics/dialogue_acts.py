# backend/app/linguistics/dialogue_acts.py

from __future__ import annotations

import logging
import re
from enum import Enum
from string import Template
from typing import Dict, FrozenSet, Iterable, List, Optional, Protocol, Sequence

from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.engine.types import Message, Transcript
from app.providers.chat_client import ChatClient, ChatMessage

logger = logging.getLogger(__name__)


class DialogueAct(str, Enum):
    INFORM = "Inform"
    REQUEST = "Request"
    CONFIRM = "Confirm"
    SUMMARIZE = "Summarize"
    EVALUATE = "Evaluate"
    PROPOSE = "Propose"
    COMPROMISE = "Compromise"
    DEFEND = "Defend"
    ACCEPT = "Accept"
    DECLINE = "Decline"
    OTHERS = "Others"
    # virtual acts for round 0 and round R+1
    START = "Start"
    END = "End"


CONVERSATION_ACTS = (
    DialogueAct.INFORM,
    DialogueAct.REQUEST,
    DialogueAct.CONFIRM,
    DialogueAct.SUMMARIZE,
    DialogueAct.EVALUATE,
)
COLLABORATION_ACTS = (
    DialogueAct.PROPOSE,
    DialogueAct.COMPROMISE,
    DialogueAct.DEFEND,
    DialogueAct.ACCEPT,
    DialogueAct.DECLINE,
)
CONTENT_ACTS = CONVERSATION_ACTS + COLLABORATION_ACTS + (DialogueAct.OTHERS,)

ACT_DEFINITIONS: Dict[DialogueAct, str] = {
    DialogueAct.INFORM: "Shares new information that wasn't previously known.",
    DialogueAct.REQUEST: "Asks for information that the speaker doesn't have.",
    DialogueAct.CONFIRM: "Asks to verify or validate shared information.",
    DialogueAct.SUMMARIZE: "Provides a brief overview of the main points.",
    DialogueAct.EVALUATE: "Gives an opinion or judgment about the information.",
    DialogueAct.PROPOSE: "Introduce a new solution in the discussion.",
    DialogueAct.COMPROMISE: "Offers a balanced solution that incorporates parts of different parties' preferences.",
    DialogueAct.DEFEND: "Maintain support for an idea or solution after consideration or challenge.",
    DialogueAct.ACCEPT: "Agrees to or accept an idea or solution.",
    DialogueAct.DECLINE: "Refuses or disagrees with an idea or solution.",
}

_BY_NAME = {a.value.lower(): a for a in CONTENT_ACTS}


def _definition_lines(acts: Sequence[DialogueAct]) -> str:
    return "\n".join(f"- {a.value} - {ACT_DEFINITIONS[a]}" for a in acts)


LABELING_PROMPT = Template(
    "# Dialogue Act Labeling\n"
    "You are annotating messages exchanged by agents collaborating on a shared decision. "
    "Label the target message with every dialogue act that applies, "
    "reading it in the context of the previous round's messages.\n"
    "\n"
    "Conversation Acts (Informational):\n"
    f"{_definition_lines(CONVERSATION_ACTS)}\n"
    "\n"
    "Collaboration Acts (Decision-Making):\n"
    f"{_definition_lines(COLLABORATION_ACTS)}\n"
    "\n"
    "If none of the acts applies, answer Others.\n"
    "\n"
    "# Previous Round\n"
    "$previous_round\n"
    "\n"
    "# Target Message\n"
    "$target_message\n"
    "\n"
    "Answer with a comma-separated list of dialogue act names only."
)


class LabeledMessage(BaseModel):
    model_config = ConfigDict(frozen=True)

    simulation_id: str
    round: int = Field(ge=1)
    agent: int = Field(ge=0)
    acts: FrozenSet[DialogueAct] = Field(min_length=1)

    @field_validator("acts")
    @classmethod
    def _content_only(cls, v: FrozenSet[DialogueAct]) -> FrozenSet[DialogueAct]:
        stray = [a for a in v if a not in CONTENT_ACTS]
        if stray:
            raise ValueError(f"Virtual acts cannot label a message: {sorted(a.value for a in stray)}")
        return v


def parse_labels(text: str) -> FrozenSet[DialogueAct]:
    """
    Comma/newline separated act names -> act set. Unknown names map to Others;
    an answer with no recognizable token at all is Others too.
    """
    acts = set()
    for token in re.split(r"[,\n;]+", text or ""):
        name = token.strip().strip(".*-\"' ").lower()
        if not name:
            continue
        acts.add(_BY_NAME.get(name, DialogueAct.OTHERS))
    return frozenset(acts or {DialogueAct.OTHERS})


def acts_to_text(acts: Iterable[DialogueAct]) -> str:
    """Sorted comma-joined form used for storage and CSV."""
    return ",".join(sorted(a.value for a in acts))


def acts_from_text(text: str) -> FrozenSet[DialogueAct]:
    return frozenset(DialogueAct(t) for t in text.split(",") if t)


def render_message(message: Message, round_num: int) -> str:
    targets = ", ".join(t.display_name for t in message.targets)
    return f"[Round {round_num}] {message.sender.display_name} to {targets}: {message.text}"


class Labeler(Protocol):
    labeler_id: str

    async def label(self, message: str, previous_round: str) -> FrozenSet[DialogueAct]:
        ...


# any keyword hit adds the act; a message may hit several acts
_STUB_KEYWORDS: Dict[DialogueAct, tuple[str, ...]] = {
    DialogueAct.PROPOSE: ("propose", "proposal"),
    DialogueAct.REQUEST: ("?",),
    DialogueAct.CONFIRM: ("confirm", "verify"),
    DialogueAct.SUMMARIZE: ("summary", "summarize", "in short"),
    DialogueAct.EVALUATE: ("i think", "unfair", "seems"),
    DialogueAct.COMPROMISE: ("compromise", "meet in the middle", "concede"),
    DialogueAct.DEFEND: ("still", "stand by", "maintain"),
    DialogueAct.ACCEPT: ("i accept", "agree", "accepted"),
    DialogueAct.DECLINE: ("decline", "disagree", "reject"),
}


class StubLabeler:
    """Deterministic keyword labeler; messages with no keyword are Inform."""

    labeler_id = "stub-keywords"

    def label_sync(self, message: str) -> FrozenSet[DialogueAct]:
        text = message.lower()
        acts = {act for act, keys in _STUB_KEYWORDS.items() if any(k in text for k in keys)}
        if DialogueAct.DECLINE in acts and "disagree" in text:
            acts.discard(DialogueAct.ACCEPT)
        return frozenset(acts or {DialogueAct.INFORM})

    async def label(self, message: str, previous_round: str) -> FrozenSet[DialogueAct]:
        return self.label_sync(message)


class ChatLabeler:
    """Labels through a chat-completion model with the labeling prompt."""

    def __init__(self, client: ChatClient) -> None:
        self.client = client
        self.labeler_id = f"chat:{client.model}"

    async def label(self, message: str, previous_round: str) -> FrozenSet[DialogueAct]:
        prompt = LABELING_PROMPT.substitute(
            previous_round=previous_round or "None", target_message=message
        )
        reply = await self.client.complete([ChatMessage(role="user", content=prompt)])
        return parse_labels(reply.text)


async def label_dialogue_acts(
    message: str,
    previous_round: str,
    labeler: Labeler,
    *,
    key: str = "",
) -> FrozenSet[DialogueAct]:
    """Label one message. Labeler failures degrade to {Others}."""
    try:
        acts = await labeler.label(message, previous_round)
    except Exception as e:
        logger.warning("labeler %s failed on %s: %s", labeler.labeler_id, key or "message", e)
        return frozenset({DialogueAct.OTHERS})
    acts = frozenset(a if a in CONTENT_ACTS else DialogueAct.OTHERS for a in acts)
    return acts or frozenset({DialogueAct.OTHERS})


async def label_transcript(
    transcript: Transcript,
    labeler: Labeler,
    cached: Optional[Dict[tuple[int, int], FrozenSet[DialogueAct]]] = None,
) -> List[LabeledMessage]:
    """
    Label every message of a transcript, reusing `cached[(round, agent)]` where
    present. Degraded (skipped) messages are Others without a labeler call.
    """
    cached = cached or {}
    out: List[LabeledMessage] = []
    previous = ""
    for record in transcript.rounds:
        for message in record.messages:
            agent = message.sender.index
            key = (record.round, agent)
            if key in cached:
                acts = cached[key]
            elif message.skipped:
                acts = frozenset({DialogueAct.OTHERS})
            else:
                acts = await label_dialogue_acts(
                    message.text,
                    previous,
                    labeler,
                    key=f"{transcript.simulation_id}/r{record.round}/a{agent}",
                )
            out.append(
                LabeledMessage(
                    simulation_id=transcript.simulation_id,
                    round=record.round,
                    agent=agent,
                    acts=acts,
                )
            )
        previous = "\n".join(
            render_message(m, record.round) for m in record.messages if not m.skipped
        )
    return out

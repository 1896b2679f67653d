# backend/app/agents/llm_policy.py

from __future__ import annotations

import logging
from typing import List

from app.agents.policy import BallotAction, MessageAction, ProposalAction, ReplyParseError
from app.agents.prompts import initialization_prompt, render_prompt, voting_prompt
from app.agents.replies import parse_agent_reply
from app.engine.types import ContextView, Phase, Proposal
from app.environments.base import Environment
from app.providers.chat_client import ChatClient, ChatMessage
from app.social_choice import Mechanism

logger = logging.getLogger(__name__)


class LLMPolicy:
    """
    Agent backed by a chat-completion model. The system message carries the
    initialization prompt with the full game history; the user message is
    the phase prompt. One provider call per decision.
    """

    def __init__(self, agent: int, env: Environment, client: ChatClient) -> None:
        self.agent = agent
        self.env = env
        self.client = client

    def __repr__(self) -> str:
        return f"LLMPolicy(agent={self.agent}, model={self.client.model})"

    def _system(self, view: ContextView) -> ChatMessage:
        return ChatMessage(role="system", content=initialization_prompt(view, self.env.describe_body))

    async def _ask(self, view: ContextView, phase: Phase, prompt: str, mechanism: Mechanism):
        reply = await self.client.complete(
            [self._system(view), ChatMessage(role="user", content=prompt)]
        )
        try:
            return parse_agent_reply(phase, mechanism, reply.text, view.roster)
        except ReplyParseError:
            logger.debug("agent %s unparseable %s reply: %r", self.agent, phase, reply.text[:200])
            raise

    async def decide_message(self, view: ContextView) -> MessageAction:
        prompt = render_prompt(
            "message_phase", {"my_name": view.me.display_name, "round_num": view.round}
        )
        return await self._ask(view, "message", prompt, view.mechanism)

    async def decide_proposal(self, view: ContextView) -> ProposalAction:
        prompt = render_prompt(
            "proposal_phase",
            {
                "my_name": view.me.display_name,
                "round_num": view.round,
                "proposal_format_text": self.env.proposal_format_text(),
            },
        )
        return await self._ask(view, "proposal", prompt, view.mechanism)

    async def decide_ballot(
        self, view: ContextView, slate: List[Proposal], mechanism: Mechanism
    ) -> BallotAction:
        prompt = voting_prompt(view, slate, self.env.describe_body)
        return await self._ask(view, "voting", prompt, mechanism)

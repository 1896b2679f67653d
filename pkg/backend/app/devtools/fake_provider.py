# backend/app/devtools/fake_provider.py

"""
Canned-response provider for offline development and tests.

Speaks just enough of the chat-completion and embedding wire protocol for the
agents, the labeler and the embedder. Run it with:

    uvicorn app.devtools.fake_provider:app --port 8010

and point ROUNDTABLE_BASE_URL at http://localhost:8010 (any API key works).
Tests mount it in-process through httpx.ASGITransport.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Set

from fastapi import APIRouter, FastAPI, Header, HTTPException
from pydantic import BaseModel

from app.linguistics.embeddings import StubEmbedder

MALFORMED_REPLY = "Sorry, I would rather not answer in JSON."

_AGENT_RE = re.compile(r"You are (.+?),")
_CANDIDATE_RE = re.compile(r"^Proposal (\d+) \(proposed by", re.MULTILINE)
_BUDGET_RE = re.compile(r"You have (\d+) points in total")


@dataclass
class FakeProviderState:
    """
    Knobs for a test or a dev session.

    - `proposal`: payload every agent proposes (None means the agent skips).
    - `malformed_agents`: display names whose every reply is not JSON.
    - `replies`: queued raw replies served first, in order, to any request.
    - `labels`: reply to dialogue-act labeling prompts.
    """

    proposal: Optional[Any] = None
    message: str = "I propose we split every good evenly."
    malformed_agents: Set[str] = field(default_factory=set)
    replies: List[str] = field(default_factory=list)
    labels: str = "Inform"
    calls: List[Dict[str, Optional[str]]] = field(default_factory=list)


class ChatMessageIn(BaseModel):
    role: str
    content: str


class ChatRequestIn(BaseModel):
    model: str
    messages: List[ChatMessageIn]
    temperature: float = 0.0


class EmbeddingRequestIn(BaseModel):
    model: str
    input: List[str]


def _phase(prompt: str) -> str:
    if prompt.startswith("# Dialogue Act Labeling"):
        return "labeling"
    if "currently in the message phase" in prompt:
        return "message"
    if "currently in the proposal phase" in prompt:
        return "proposal"
    if "at the voting phase" in prompt:
        return "voting"
    return "unknown"


def _ballot(prompt: str) -> Any:
    ids = sorted({int(m) for m in _CANDIDATE_RE.findall(prompt)})
    if not ids:
        return "None"
    if "rate every proposal" in prompt:
        return {str(c): 5 if c == ids[0] else 1 for c in ids}
    if "rank every proposal" in prompt:
        return ids
    budget = _BUDGET_RE.search(prompt)
    if budget:
        return {str(ids[0]): int(budget.group(1))}
    return ids[0]


def canned_reply(state: FakeProviderState, messages: List[ChatMessageIn]) -> str:
    system = next((m.content for m in messages if m.role == "system"), "")
    prompt = messages[-1].content
    phase = _phase(prompt)
    match = _AGENT_RE.search(system) or _AGENT_RE.search(prompt)
    agent = match.group(1) if match else None
    state.calls.append({"agent": agent, "phase": phase})

    if state.replies:
        return state.replies.pop(0)
    if agent is not None and agent in state.malformed_agents:
        return MALFORMED_REPLY
    if phase == "labeling":
        return state.labels
    if phase == "message":
        return json.dumps({"target": [], "message": state.message})
    if phase == "proposal":
        proposal = "None" if state.proposal is None else state.proposal
        return json.dumps({"reason_for_decision": "Equal shares.", "proposal": proposal})
    if phase == "voting":
        return json.dumps({"reason_for_decision": "Lowest id.", "decision": _ballot(prompt)})
    return "OK"


def _check_auth(authorization: Optional[str]) -> None:
    if not authorization or not authorization.startswith("Bearer "):
        raise HTTPException(status_code=401, detail="missing bearer token")


def create_app(state: Optional[FakeProviderState] = None) -> FastAPI:
    state = state or FakeProviderState()
    embedder = StubEmbedder()
    router = APIRouter()

    @router.post("/chat/completions")
    def chat_completions(req: ChatRequestIn, authorization: Optional[str] = Header(default=None)):
        _check_auth(authorization)
        text = canned_reply(state, req.messages)
        return {
            "id": f"fake-{len(state.calls)}",
            "object": "chat.completion",
            "model": req.model,
            "choices": [
                {
                    "index": 0,
                    "message": {"role": "assistant", "content": text},
                    "finish_reason": "stop",
                }
            ],
        }

    @router.post("/embeddings")
    def embeddings(req: EmbeddingRequestIn, authorization: Optional[str] = Header(default=None)):
        _check_auth(authorization)
        vectors = embedder.embed_sync(req.input)
        return {
            "object": "list",
            "model": req.model,
            "data": [
                {"object": "embedding", "index": i, "embedding": v.tolist()}
                for i, v in enumerate(vectors)
            ],
        }

    app = FastAPI(title="RoundTable fake provider")
    app.include_router(router, prefix="/v1")
    app.state.fake = state
    return app


app = create_app()

# backend/tests/test_providers.py

import httpx
import numpy as np
import pytest

from app.devtools.fake_provider import FakeProviderState, create_app
from app.linguistics.dialogue_acts import ChatLabeler, DialogueAct
from app.providers.chat_client import ChatClient, ChatMessage, ProviderError
from app.providers.embedding_client import EmbeddingClient


def fake_transport(state=None):
    return httpx.ASGITransport(app=create_app(state or FakeProviderState()))


def chat_client(transport, **kwargs):
    kwargs.setdefault("max_retries", 3)
    return ChatClient(
        base_url="http://fake",
        api_key="test-key",
        model="fake-model",
        backoff_s=0,
        transport=transport,
        **kwargs,
    )


class Flaky:
    """Answers with the given status codes in order, then a valid completion."""

    def __init__(self, *statuses):
        self.statuses = list(statuses)
        self.calls = 0

    def __call__(self, request):
        self.calls += 1
        if self.statuses:
            return httpx.Response(self.statuses.pop(0), text="busy")
        return httpx.Response(200, json={"choices": [{"message": {"content": "hi"}}]})


async def test_chat_completion_against_fake_provider():
    state = FakeProviderState(replies=['{"decision": 2}'])
    client = chat_client(fake_transport(state))
    reply = await client.complete([ChatMessage(role="user", content="You are Agent 1, voting.")])
    assert reply.text == '{"decision": 2}'
    assert reply.model == "fake-model"
    assert state.calls == [{"agent": "Agent 1", "phase": "unknown"}]


async def test_retryable_statuses_are_retried():
    handler = Flaky(503, 429)
    client = chat_client(httpx.MockTransport(handler))
    reply = await client.complete([ChatMessage(role="user", content="ping")])
    assert reply.text == "hi"
    assert handler.calls == 3


async def test_client_errors_fail_without_retry():
    handler = Flaky(401)
    client = chat_client(httpx.MockTransport(handler))
    with pytest.raises(ProviderError) as exc:
        await client.complete([ChatMessage(role="user", content="ping")])
    assert exc.value.status == 401
    assert handler.calls == 1


async def test_retries_run_out():
    handler = Flaky(500, 500, 500)
    client = chat_client(httpx.MockTransport(handler), max_retries=2)
    with pytest.raises(ProviderError):
        await client.complete([ChatMessage(role="user", content="ping")])
    assert handler.calls == 2


async def test_missing_api_key():
    client = ChatClient(base_url="http://fake", api_key="", transport=fake_transport())
    with pytest.raises(RuntimeError, match="ROUNDTABLE_API_KEY"):
        await client.complete([ChatMessage(role="user", content="ping")])


async def test_malformed_completion_body():
    transport = httpx.MockTransport(lambda request: httpx.Response(200, json={"choices": []}))
    with pytest.raises(ProviderError):
        await chat_client(transport).complete([ChatMessage(role="user", content="ping")])


async def test_embeddings_are_unit_norm_and_ordered():
    client = EmbeddingClient(
        base_url="http://fake", api_key="test-key", backoff_s=0, transport=fake_transport()
    )
    vectors = await client.embed(["split evenly", "I want more of good 2"])
    assert vectors.shape[0] == 2
    assert np.linalg.norm(vectors, axis=1) == pytest.approx([1.0, 1.0])
    again = await client.embed(["I want more of good 2"])
    assert np.allclose(vectors[1], again[0])


async def test_chat_labeler_through_fake_provider():
    state = FakeProviderState(labels="Propose, Request")
    labeler = ChatLabeler(chat_client(fake_transport(state)))
    assert labeler.labeler_id == "chat:fake-model"
    acts = await labeler.label("How about an even split?", "")
    assert acts == {DialogueAct.PROPOSE, DialogueAct.REQUEST}
    assert state.calls[-1]["phase"] == "labeling"

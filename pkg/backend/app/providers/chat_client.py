# backend/app/providers/chat_client.py

from __future__ import annotations

import asyncio
import logging
from typing import Any, Dict, List, Literal, Optional

import httpx
from pydantic import BaseModel, ConfigDict, Field

from app.config import CONFIG

logger = logging.getLogger(__name__)

CHAT_PATH = "/v1/chat/completions"
# temperature is pinned for every agent call
TEMPERATURE = 0.0


class ProviderError(Exception):
    """HTTP or transport failure talking to a model provider."""

    def __init__(self, message: str, status: Optional[int] = None, body: Optional[str] = None):
        super().__init__(message)
        self.status = status
        self.body = body


class ChatMessage(BaseModel):
    model_config = ConfigDict(frozen=True)

    role: Literal["system", "user", "assistant"]
    content: str


class ChatCompletionRequest(BaseModel):
    model_config = ConfigDict(frozen=True)

    model: str
    messages: List[ChatMessage] = Field(min_length=1)
    temperature: float = TEMPERATURE


class ChatCompletionResponse(BaseModel):
    model_config = ConfigDict(frozen=True)

    text: str
    model: Optional[str] = None
    raw: Dict[str, Any] = Field(default_factory=dict, repr=False)


def _ensure_api_key(api_key: Optional[str]) -> str:
    if not api_key:
        raise RuntimeError(
            "ROUNDTABLE_API_KEY not set in environment. "
            "Add it to your .env or run with --no-llm for scripted agents."
        )
    return api_key


def _retryable(status: int) -> bool:
    return status == 429 or status >= 500


async def post_json(
    *,
    base_url: str,
    path: str,
    api_key: str,
    payload: Dict[str, Any],
    timeout_s: float,
    max_retries: int,
    backoff_s: float,
    transport: Optional[httpx.AsyncBaseTransport] = None,
) -> Dict[str, Any]:
    """
    POST with bearer auth. Transport errors, 429 and 5xx are retried up to
    `max_retries` attempts; other 4xx fail at once.
    """
    url = base_url.rstrip("/") + path
    headers = {"Authorization": f"Bearer {api_key}", "Content-Type": "application/json"}
    last: Optional[ProviderError] = None

    for attempt in range(1, max_retries + 1):
        try:
            async with httpx.AsyncClient(timeout=timeout_s, transport=transport) as client:
                resp = await client.post(url, json=payload, headers=headers)
        except httpx.HTTPError as exc:
            last = ProviderError(f"Provider transport error: {exc}")
        else:
            if resp.status_code < 400:
                try:
                    return resp.json()
                except ValueError:
                    raise ProviderError(
                        "Provider returned non-JSON body", resp.status_code, resp.text
                    ) from None
            last = ProviderError(
                f"Provider HTTP error {resp.status_code}", resp.status_code, resp.text
            )
            if not _retryable(resp.status_code):
                raise last

        logger.warning("%s attempt %s/%s failed: %s", path, attempt, max_retries, last)
        if attempt < max_retries and backoff_s > 0:
            await asyncio.sleep(backoff_s * 2 ** (attempt - 1))

    assert last is not None
    raise last


class ChatClient:
    """
    Chat-completion wire client. Holds no per-request state, so one instance
    can serve every agent concurrently.
    """

    def __init__(
        self,
        *,
        base_url: Optional[str] = None,
        api_key: Optional[str] = None,
        model: Optional[str] = None,
        timeout_s: Optional[float] = None,
        max_retries: Optional[int] = None,
        backoff_s: float = 1.0,
        transport: Optional[httpx.AsyncBaseTransport] = None,
    ) -> None:
        self.base_url = base_url or CONFIG.base_url
        self.api_key = api_key if api_key is not None else CONFIG.api_key
        self.model = model or CONFIG.model
        self.timeout_s = timeout_s if timeout_s is not None else CONFIG.timeout_s
        self.max_retries = max_retries if max_retries is not None else CONFIG.max_retries
        self.backoff_s = backoff_s
        self.transport = transport

    async def complete(self, messages: List[ChatMessage]) -> ChatCompletionResponse:
        request = ChatCompletionRequest(model=self.model, messages=messages)
        data = await post_json(
            base_url=self.base_url,
            path=CHAT_PATH,
            api_key=_ensure_api_key(self.api_key),
            payload=request.model_dump(),
            timeout_s=self.timeout_s,
            max_retries=self.max_retries,
            backoff_s=self.backoff_s,
            transport=self.transport,
        )

        # { "choices": [ { "message": { "role": "assistant", "content": "..." } } ], ... }
        try:
            text = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise ProviderError("Chat response missing choices[0].message.content", body=str(data)) from None
        if not isinstance(text, str):
            raise ProviderError("Chat response content is not text", body=str(data))
        return ChatCompletionResponse(text=text, model=data.get("model"), raw=data)

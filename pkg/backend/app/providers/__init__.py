# backend/app/providers/__init__.py

"""
Providers package

httpx wire clients for chat-completion and embedding endpoints.
"""

from .chat_client import (
    ChatClient,
    ChatCompletionRequest,
    ChatCompletionResponse,
    ChatMessage,
    ProviderError,
)
from .embedding_client import EmbeddingClient

__all__ = [
    "ChatClient",
    "ChatCompletionRequest",
    "ChatCompletionResponse",
    "ChatMessage",
    "EmbeddingClient",
    "ProviderError",
]

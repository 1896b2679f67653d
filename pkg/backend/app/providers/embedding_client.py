# backend/app/providers/embedding_client.py

from __future__ import annotations

from typing import List, Optional, Sequence

import httpx
import numpy as np

from app.config import CONFIG
from app.providers.chat_client import ProviderError, _ensure_api_key, post_json

EMBEDDINGS_PATH = "/v1/embeddings"


class EmbeddingClient:
    """
    POST /v1/embeddings {model, input[]} -> one vector per input, returned
    L2-normalized in input order.
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
        self.model = model or CONFIG.embedding_model
        self.timeout_s = timeout_s if timeout_s is not None else CONFIG.timeout_s
        self.max_retries = max_retries if max_retries is not None else CONFIG.max_retries
        self.backoff_s = backoff_s
        self.transport = transport

    async def embed(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            return np.zeros((0, 0))
        data = await post_json(
            base_url=self.base_url,
            path=EMBEDDINGS_PATH,
            api_key=_ensure_api_key(self.api_key),
            payload={"model": self.model, "input": list(texts)},
            timeout_s=self.timeout_s,
            max_retries=self.max_retries,
            backoff_s=self.backoff_s,
            transport=self.transport,
        )

        # { "data": [ { "index": 0, "embedding": [...] }, ... ] }
        try:
            rows = sorted(data["data"], key=lambda d: d.get("index", 0))
            vectors: List[List[float]] = [row["embedding"] for row in rows]
        except (KeyError, TypeError):
            raise ProviderError("Embedding response missing data[].embedding", body=str(data)) from None
        if len(vectors) != len(texts):
            raise ProviderError(f"Asked for {len(texts)} embeddings, got {len(vectors)}")

        matrix = np.asarray(vectors, dtype=float)
        norms = np.linalg.norm(matrix, axis=1, keepdims=True)
        if np.any(norms == 0):
            raise ProviderError("Provider returned a zero embedding vector")
        return matrix / norms

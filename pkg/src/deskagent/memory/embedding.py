from __future__ import annotations

import hashlib
import math
import re
from functools import lru_cache
from typing import Protocol, Sequence

import httpx

from deskagent.errors import BackendError
from deskagent.llm import endpoint_url

_TOKEN = re.compile(r"\w+")


@lru_cache(maxsize=65536)
def _token_hash(tok: str) -> int:
    return int.from_bytes(hashlib.blake2b(tok.encode("utf-8"), digest_size=8).digest(), "little")


class Embedder(Protocol):
    dim: int

    def embed(self, text: str) -> tuple[float, ...]: ...


class HashEmbedder:
    """Bag-of-words over hashed lowercase tokens. Offline and deterministic."""

    name = "hash"

    def __init__(self, dim: int = 256):
        if dim <= 0:
            raise ValueError("dim must be positive")
        self.dim = dim

    def embed(self, text: str) -> tuple[float, ...]:
        if not text or not text.strip():
            raise ValueError("cannot embed empty text")
        tokens = _TOKEN.findall(text.lower()) or [text.strip()]
        vec = [0.0] * self.dim
        for tok in tokens:
            vec[_token_hash(tok) % self.dim] += 1.0
        return tuple(vec)


class HttpEmbedder:
    """OpenAI-compatible ``/v1/embeddings`` client."""

    name = "http"

    def __init__(self, endpoint: str, model: str, dim: int, api_key: str | None = None, timeout: float = 30.0, client: httpx.Client | None = None):
        self.url = endpoint_url(endpoint, "/embeddings")
        self.model = model
        self.dim = dim
        self.api_key = api_key
        self._client = client or httpx.Client(timeout=timeout)

    def embed(self, text: str) -> tuple[float, ...]:
        if not text or not text.strip():
            raise ValueError("cannot embed empty text")
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        try:
            resp = self._client.post(self.url, json={"model": self.model, "input": text}, headers=headers)
            resp.raise_for_status()
            values = resp.json()["data"][0]["embedding"]
        except (httpx.HTTPError, ValueError, KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"embedding request failed: {exc}") from exc
        vec = tuple(float(v) for v in values)
        if len(vec) != self.dim or not all(math.isfinite(v) for v in vec):
            raise BackendError(f"embedding has wrong dimension or non-finite values (got {len(vec)})")
        return vec


def cosine(a: Sequence[float], b: Sequence[float]) -> float:
    """Cosine similarity; 0.0 if either vector is all zeros."""
    if len(a) != len(b):
        raise ValueError("dimension mismatch")
    dot = math.fsum(x * y for x, y in zip(a, b))
    na = math.sqrt(math.fsum(x * x for x in a))
    nb = math.sqrt(math.fsum(y * y for y in b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return dot / (na * nb)

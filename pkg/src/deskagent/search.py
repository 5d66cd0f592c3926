"""Web-knowledge search clients. All return plain answer text."""
from __future__ import annotations

from pathlib import Path

import httpx

from deskagent.errors import BackendError
from deskagent.llm import fingerprint


class DisabledSearch:
    name = "disabled"

    def search(self, query: str) -> str:
        return ""


class HttpSearch:
    """POSTs ``{"query": ...}`` to an endpoint that answers ``{"answer": ...}``."""

    name = "http"

    def __init__(self, endpoint: str, timeout: float = 30.0, client: httpx.Client | None = None):
        self.endpoint = endpoint
        self._client = client or httpx.Client(timeout=timeout)

    def search(self, query: str) -> str:
        try:
            resp = self._client.post(self.endpoint, json={"query": query})
            resp.raise_for_status()
            return str(resp.json().get("answer") or "")
        except (httpx.HTTPError, ValueError, AttributeError) as exc:
            raise BackendError(f"search failed: {exc}") from exc


class StubSearch:
    """Canned answers from ``<dir>/<fingerprint(query)>.txt``, else ``default.txt``.

    An in-memory ``answers`` mapping (query text -> answer) takes precedence.
    """

    name = "stub"

    def __init__(self, directory: str | Path | None = None, answers: dict[str, str] | None = None):
        self.directory = Path(directory) if directory else None
        self.answers = dict(answers or {})

    def search(self, query: str) -> str:
        if query in self.answers:
            return self.answers[query]
        if self.directory is None:
            return ""
        for name in (f"{fingerprint(query)}.txt", "default.txt"):
            p = self.directory / name
            if p.exists():
                return p.read_text(encoding="utf-8").strip()
        return ""

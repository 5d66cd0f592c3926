"""Chat-completion backends: an OpenAI-compatible HTTP client and a scripted stub."""
from __future__ import annotations

import base64
import hashlib
import json
import logging
import mimetypes
import os
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol, Sequence
from urllib.parse import urlparse

import httpx

from deskagent.errors import ConfigError, ModelError, ScriptExhausted

log = logging.getLogger(__name__)

ROLES = ("system", "user", "assistant")

EventHook = Callable[[str, dict], None]


@dataclass(frozen=True)
class ChatMessage:
    role: str
    text: str = ""
    images: tuple[str, ...] = ()

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        if not self.text and not self.images:
            raise ValueError("message needs text or images")


@dataclass(frozen=True)
class ModelConfig:
    endpoint: str = "http://localhost:8000/v1"
    model_name: str = "gpt-4o"
    temperature: float = 0.0
    max_tokens: int = 1024
    timeout: float = 60.0
    api_key: str | None = None

    def __post_init__(self):
        parsed = urlparse(self.endpoint)
        if parsed.scheme not in ("http", "https") or not parsed.netloc:
            raise ConfigError(f"malformed endpoint URL {self.endpoint!r}")
        if self.temperature < 0:
            raise ConfigError("temperature must be >= 0")
        if self.max_tokens <= 0:
            raise ConfigError("max_tokens must be > 0")

    @classmethod
    def from_env(cls, **overrides) -> "ModelConfig":
        env = {}
        if os.environ.get("AGENT_MODEL_ENDPOINT"):
            env["endpoint"] = os.environ["AGENT_MODEL_ENDPOINT"]
        if os.environ.get("AGENT_MODEL_KEY"):
            env["api_key"] = os.environ["AGENT_MODEL_KEY"]
        env.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**env)


def normalize_prompt(text: str) -> str:
    return " ".join(text.split())


def fingerprint(text: str) -> str:
    """Stable 64-bit hash of whitespace-normalized text, as 16 hex digits."""
    return hashlib.blake2b(normalize_prompt(text).encode("utf-8"), digest_size=8).hexdigest()


def prompt_text(messages: Sequence[ChatMessage]) -> str:
    return "\n".join(m.text for m in messages)


class ChatBackend(Protocol):
    name: str

    def complete(self, messages: Sequence[ChatMessage], on_event: EventHook | None = None) -> "Completion": ...


@dataclass
class Completion:
    text: str
    prompt_tokens: int | None = None
    completion_tokens: int | None = None


def endpoint_url(base: str, path: str) -> str:
    base = base.rstrip("/")
    if base.endswith(path):
        return base
    if base.endswith("/v1"):
        return base + path
    return base + "/v1" + path


def _image_part(ref: str) -> dict:
    if ref.startswith(("data:", "http://", "https://")):
        url = ref
    else:
        mime = mimetypes.guess_type(ref)[0] or "image/png"
        url = f"data:{mime};base64," + base64.b64encode(Path(ref).read_bytes()).decode("ascii")
    return {"type": "image_url", "image_url": {"url": url}}


def message_payload(m: ChatMessage) -> dict:
    if not m.images:
        return {"role": m.role, "content": m.text}
    parts = [{"type": "text", "text": m.text}] if m.text else []
    parts += [_image_part(ref) for ref in m.images]
    return {"role": m.role, "content": parts}


class HttpChatBackend:
    """OpenAI-compatible ``/v1/chat/completions`` client with retry and backoff."""

    name = "http"

    def __init__(self, cfg: ModelConfig, retries: int = 2, backoff: float = 0.5, client: httpx.Client | None = None, sleep=time.sleep):
        self.cfg = cfg
        self.retries = retries
        self.backoff = backoff
        self.url = endpoint_url(cfg.endpoint, "/chat/completions")
        self._client = client or httpx.Client(timeout=cfg.timeout)
        self._sleep = sleep

    def _headers(self):
        h = {"Content-Type": "application/json"}
        if self.cfg.api_key:
            h["Authorization"] = f"Bearer {self.cfg.api_key}"
        return h

    def _attempt(self, body: dict) -> Completion:
        try:
            resp = self._client.post(self.url, json=body, headers=self._headers())
        except httpx.HTTPError as exc:
            raise ModelError(f"transport error: {exc}", kind="transport") from exc
        if resp.status_code != 200:
            raise ModelError(f"HTTP {resp.status_code}: {resp.text[:200]}", kind="status")
        try:
            data = resp.json()
            text = data["choices"][0]["message"].get("content") or ""
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ModelError(f"unreadable response body: {exc}", kind="status") from exc
        if not text.strip():
            raise ModelError("empty reply", kind="empty-reply")
        usage = data.get("usage") or {}
        return Completion(text, usage.get("prompt_tokens"), usage.get("completion_tokens"))

    def complete(self, messages, on_event=None):
        body = {
            "model": self.cfg.model_name,
            "messages": [message_payload(m) for m in messages],
            "temperature": self.cfg.temperature,
            "max_tokens": self.cfg.max_tokens,
        }
        for attempt in range(self.retries + 1):
            try:
                return self._attempt(body)
            except ModelError as exc:
                if attempt == self.retries:
                    raise
                delay = self.backoff * 2**attempt
                log.warning("chat request failed (%s), retry %d in %.2fs", exc, attempt + 1, delay)
                if on_event:
                    on_event("retry", {"attempt": attempt + 1, "error": exc.kind, "detail": str(exc)[:200]})
                self._sleep(delay)
        raise AssertionError("unreachable")


@dataclass
class ScriptRule:
    match: str
    reply: str
    repeat: bool = False

    def matches(self, prompt: str, digest: str) -> bool:
        if self.match.startswith("fp:"):
            return self.match[3:] == digest
        return self.match in prompt


@dataclass
class ScriptedBackend:
    """Deterministic replies from an ordered rule list.

    Each prompt is answered by the first unconsumed rule whose ``match`` is a
    substring of the prompt (or, as ``fp:<hex>``, equals its fingerprint).
    Rules are consumed on use unless ``repeat`` is set.
    """

    rules: list[ScriptRule]
    name: str = "scripted"
    _used: set = field(default_factory=set, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @classmethod
    def from_file(cls, path) -> "ScriptedBackend":
        rules = []
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip() or line.lstrip().startswith("//"):
                continue
            try:
                d = json.loads(line)
                rules.append(ScriptRule(str(d["match"]), str(d["reply"]), bool(d.get("repeat", False))))
            except (ValueError, KeyError, TypeError) as exc:
                raise ConfigError(f"{path}:{lineno}: bad script rule ({exc})") from exc
        return cls(rules)

    def complete(self, messages, on_event=None):
        prompt = prompt_text(messages)
        digest = fingerprint(prompt)
        with self._lock:
            for i, rule in enumerate(self.rules):
                if i in self._used or not rule.matches(prompt, digest):
                    continue
                if not rule.repeat:
                    self._used.add(i)
                if not rule.reply.strip():
                    raise ModelError("empty reply", kind="empty-reply")
                return Completion(rule.reply)
        raise ScriptExhausted(digest)

    @property
    def remaining(self) -> int:
        return sum(1 for i, r in enumerate(self.rules) if i not in self._used and not r.repeat)


class ModelClient:
    """Binds a backend to a run's tracer so every call is logged exactly once."""

    def __init__(self, backend, tracer=None):
        self.backend = backend
        self.tracer = tracer

    def complete(self, messages: Sequence[ChatMessage], purpose: str) -> str:
        prompt = prompt_text(messages)
        digest = fingerprint(prompt)

        def hook(kind, payload):
            if self.tracer is not None:
                self.tracer.emit("warning", {"source": "model", "event": kind, "purpose": purpose, **payload})

        start = time.perf_counter()
        error = None
        completion = None
        try:
            completion = self.backend.complete(messages, on_event=hook)
            return completion.text.strip()
        except ModelError as exc:
            error = exc
            raise
        finally:
            if self.tracer is not None:
                payload = {"purpose": purpose, "backend": self.backend.name, "prompt_digest": digest}
                if completion is not None:
                    payload["reply_digest"] = fingerprint(completion.text)
                    payload["prompt_tokens"] = completion.prompt_tokens
                    payload["completion_tokens"] = completion.completion_tokens
                else:
                    payload["error"] = f"{error.kind}: {error}" if error else "interrupted"
                full = {"prompt": prompt, "reply": completion.text if completion else None}
                self.tracer.emit("model-call", payload, full=full, latency_ms=(time.perf_counter() - start) * 1000)


def reply_or_raise(text: str, what: str) -> str:
    text = text.strip()
    if not text:
        raise ModelError(f"empty {what} reply", kind="empty-reply")
    return text


_FENCE = re.compile(r"^```[a-zA-Z]*\n?|\n?```$")


def strip_fences(text: str) -> str:
    return _FENCE.sub("", text.strip()).strip()

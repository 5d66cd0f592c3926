"""Run configuration: defaults, config files, environment variables and flag overrides."""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from deskagent.errors import ConfigError
from deskagent.llm import ModelConfig


@dataclass
class RetrievalToggles:
    web: bool = True
    narrative: bool = True
    episodic: bool = True


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    backend: str = "scripted"  # scripted | http
    script: str | None = None
    memory_dir: str = "memory"
    env_source: str | None = None
    trace_dir: str = "traces"
    report_path: str | None = None
    full_trace: bool = False
    max_steps_total: int = 50
    max_steps_per_subtask: int = 15
    max_replans: int = 3
    toggles: RetrievalToggles = field(default_factory=RetrievalToggles)
    reflection_interval: int = 3
    history_window: int = 5
    failure_note_steps: int = 5
    iou_threshold: float = 0.5
    narrative_k: int = 1
    episodic_k: int = 1
    min_similarity: float | None = None
    embedding: str = "hash"  # hash | http
    embedding_dim: int = 256
    embedding_model: str = "text-embedding-3-small"
    search: str = "stub"  # stub | http | disabled
    search_endpoint: str | None = None
    search_stub_dir: str | None = None
    apps: list[str] = field(default_factory=list)
    parallelism: int = 1
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self):
        for name in ("max_steps_total", "max_steps_per_subtask", "reflection_interval", "narrative_k", "episodic_k", "embedding_dim", "parallelism"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.max_replans < 0 or self.history_window < 0 or self.failure_note_steps < 0:
            raise ConfigError("max_replans, history_window and failure_note_steps must be >= 0")
        if not 0.0 <= self.iou_threshold <= 1.0:
            raise ConfigError("iou_threshold must be within [0, 1]")
        if self.backend not in ("scripted", "http"):
            raise ConfigError(f"unknown backend {self.backend!r}")
        if self.search not in ("stub", "http", "disabled"):
            raise ConfigError(f"unknown search client {self.search!r}")
        if self.search == "http" and not self.search_endpoint:
            raise ConfigError("search=http needs search_endpoint")
        if self.embedding not in ("hash", "http"):
            raise ConfigError(f"unknown embedding backend {self.embedding!r}")

    def header(self) -> dict:
        """Config snapshot for trace headers (no secrets)."""
        d = asdict(self)
        d["model"].pop("api_key", None)
        return d


def _build(data: dict) -> RunConfig:
    data = dict(data)
    known = {f.name for f in fields(RunConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    try:
        if isinstance(data.get("model"), dict):
            data["model"] = ModelConfig(**data["model"])
        if isinstance(data.get("toggles"), dict):
            data["toggles"] = RetrievalToggles(**data["toggles"])
        return RunConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Defaults < config file (JSON) < environment variables < explicit overrides."""
    data: dict = {}
    if path:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
    model = dict(data.get("model") or {})
    if os.environ.get("AGENT_MODEL_ENDPOINT"):
        model["endpoint"] = os.environ["AGENT_MODEL_ENDPOINT"]
    if os.environ.get("AGENT_MODEL_KEY"):
        model["api_key"] = os.environ["AGENT_MODEL_KEY"]
    data["model"] = model
    toggles = dict(data.get("toggles") or {})
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key in ("web", "narrative", "episodic"):
            toggles[key] = value
        elif key in ("endpoint", "model_name", "temperature", "max_tokens", "timeout"):
            model[key] = value
        else:
            data[key] = value
    data["toggles"] = toggles
    return _build(data)


__all__ = ["RetrievalToggles", "RunConfig", "load_config", "replace"]

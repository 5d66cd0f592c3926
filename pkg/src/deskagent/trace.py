"""JSON-lines run traces.

Every line is one event: ``{"seq", "run", "kind", "payload", "time"}``.
Wall-clock data (timestamp, latency) lives only under ``time`` so two runs
can be compared with :func:`without_timing`.
"""
from __future__ import annotations

import json
import threading
import time
from pathlib import Path

KINDS = (
    "header", "model-call", "retrieval", "plan", "action", "env-step",
    "episode", "replan", "save", "warning", "outcome", "error",
)


class Tracer:
    def __init__(self, run_id: str, path: str | Path | None = None, full: bool = False, clock=time.time):
        self.run_id = run_id
        self.path = Path(path) if path else None
        self.full = full
        self.events: list[dict] = []
        self._clock = clock
        self._lock = threading.Lock()
        self._fh = None
        if self.path:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = self.path.open("w", encoding="utf-8")

    def emit(self, kind: str, payload: dict | None = None, full: dict | None = None, latency_ms: float | None = None) -> dict:
        if kind not in KINDS:
            raise ValueError(f"unknown trace event kind {kind!r}")
        payload = dict(payload or {})
        if self.full and full:
            payload["full"] = full
        timing = {"ts": self._clock()}
        if latency_ms is not None:
            timing["latency_ms"] = round(latency_ms, 3)
        with self._lock:
            event = {"seq": len(self.events), "run": self.run_id, "kind": kind, "payload": payload, "time": timing}
            self.events.append(event)
            if self._fh:
                self._fh.write(json.dumps(event, ensure_ascii=False, sort_keys=True) + "\n")
                self._fh.flush()
        return event

    def of_kind(self, kind: str, **match) -> list[dict]:
        return [
            e for e in self.events
            if e["kind"] == kind and all(e["payload"].get(k) == v for k, v in match.items())
        ]

    def close(self):
        if self._fh:
            self._fh.close()
            self._fh = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_trace(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def without_timing(events: list[dict]) -> list[dict]:
    return [{k: v for k, v in e.items() if k != "time"} for e in events]

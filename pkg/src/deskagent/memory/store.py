"""Append-only experience stores backed by JSON-lines files.

File layout: a header line ``{"format": "deskagent-memory", "version": 1,
"kind": ..., "dim": ...}`` followed by one record per line with the key
embedding inlined.
"""
from __future__ import annotations

import json
import math
import threading
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from deskagent.errors import PersistError

FORMAT = "deskagent-memory"
VERSION = 1
OUTCOMES = ("success", "failure")
KEY_SEP = "\n"


@dataclass(frozen=True)
class NarrativeRecord:
    id: str
    key: str
    key_embedding: tuple[float, ...]
    summary: str
    outcome: str
    created_at: float


@dataclass(frozen=True)
class EpisodicRecord:
    id: str
    key: str
    key_embedding: tuple[float, ...]
    plan: str
    created_at: float
    provenance: dict = field(default_factory=dict, hash=False, compare=False)

    @property
    def segments(self) -> tuple[str, str, str]:
        q, s, c = self.key.split(KEY_SEP)
        return q, s, c


Record = Union[NarrativeRecord, EpisodicRecord]
_RECORD_TYPES = {"narrative": NarrativeRecord, "episodic": EpisodicRecord}


def _one_line(text: str) -> str:
    return " ".join(text.split())


def episodic_key(query: str, subtask: str, context: str) -> str:
    """Join (query, subtask, context) so the key always splits into three parts."""
    return KEY_SEP.join(_one_line(p) for p in (query, subtask, context))


class MemoryStore:
    """Narrative or episodic memory with exact cosine retrieval.

    Ranking is by descending cosine similarity, then older ``created_at``,
    then record id. Writes go through a single lock; reads see whole records.
    """

    def __init__(self, kind: str, embedder, path: str | Path | None = None, clock=time.time):
        if kind not in _RECORD_TYPES:
            raise ValueError(f"unknown store kind {kind!r}")
        self.kind = kind
        self.embedder = embedder
        self.path = Path(path) if path else None
        self.read_count = 0
        self._clock = clock
        self._records: list[Record] = []
        self._buf = np.zeros((16, embedder.dim))
        self._norm_buf = np.zeros(16)
        self._lock = threading.Lock()
        if self.path is not None:
            self._load()

    @classmethod
    def open(cls, directory, kind, embedder, clock=time.time) -> "MemoryStore":
        return cls(kind, embedder, Path(directory) / f"{kind}.jsonl", clock)

    # -- persistence ---------------------------------------------------------

    def _header(self):
        return {"format": FORMAT, "version": VERSION, "kind": self.kind, "dim": self.embedder.dim}

    def _load(self):
        if not self.path.exists() or self.path.stat().st_size == 0:
            return
        cls = _RECORD_TYPES[self.kind]
        try:
            lines = self.path.read_text(encoding="utf-8").splitlines()
            header = json.loads(lines[0])
        except (OSError, ValueError, IndexError) as exc:
            raise PersistError(f"cannot read {self.path}: {exc}") from exc
        if header.get("format") != FORMAT or header.get("kind") != self.kind:
            raise PersistError(f"{self.path} is not a {self.kind} memory file")
        if header.get("version") != VERSION:
            raise PersistError(f"{self.path}: unsupported schema version {header.get('version')}")
        if header.get("dim") != self.embedder.dim:
            raise PersistError(f"{self.path}: embedding dim {header.get('dim')} != embedder dim {self.embedder.dim}")
        records = []
        for lineno, line in enumerate(lines[1:], 2):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
                d["key_embedding"] = tuple(d["key_embedding"])
                records.append(cls(**d))
            except (ValueError, TypeError, KeyError) as exc:
                # a torn final line from a crash is skipped; anything else is corruption
                if lineno == len(lines):
                    break
                raise PersistError(f"{self.path}:{lineno}: bad record ({exc})") from exc
        for rec in records:
            self._index(rec)

    def _append_line(self, rec: Record):
        if self.path is None:
            return
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            new = not self.path.exists() or self.path.stat().st_size == 0
            with self.path.open("a", encoding="utf-8") as fh:
                if new:
                    fh.write(json.dumps(self._header()) + "\n")
                fh.write(json.dumps(asdict(rec), ensure_ascii=False) + "\n")
        except OSError as exc:
            raise PersistError(f"cannot append to {self.path}: {exc}") from exc

    def _index(self, rec: Record):
        if len(rec.key_embedding) != self.embedder.dim:
            raise PersistError(f"record {rec.id}: embedding must have {self.embedder.dim} values")
        n = len(self._records)
        if n == len(self._buf):
            self._buf = np.concatenate([self._buf, np.zeros_like(self._buf)])
            self._norm_buf = np.concatenate([self._norm_buf, np.zeros_like(self._norm_buf)])
        row = self._buf[n]
        row[:] = rec.key_embedding
        sq = float(row @ row)
        if not math.isfinite(sq):
            row[:] = 0.0
            raise PersistError(f"record {rec.id}: embedding has non-finite values")
        self._norm_buf[n] = math.sqrt(sq)
        self._records.append(rec)

    def _next_id(self) -> str:
        return f"{self.kind[0]}{len(self._records):06d}"

    # -- writes --------------------------------------------------------------

    def save_narrative(self, query: str, summary: str, outcome: str) -> str:
        if self.kind != "narrative":
            raise TypeError("save_narrative on an episodic store")
        if not query.strip() or not summary.strip():
            raise ValueError("query and summary must be non-empty")
        if outcome not in OUTCOMES:
            raise ValueError(f"outcome must be one of {OUTCOMES}")
        emb = self.embedder.embed(query)
        with self._lock:
            rec = NarrativeRecord(self._next_id(), query, emb, summary, outcome, self._clock())
            self._append_line(rec)
            self._index(rec)
        return rec.id

    def save_episodic(self, query: str, subtask: str, context: str, plan: str, provenance: dict | None = None) -> str:
        """Store a subtask plan. Callers must only pass subtasks that ended DONE."""
        if self.kind != "episodic":
            raise TypeError("save_episodic on a narrative store")
        if not plan.strip():
            raise ValueError("plan must be non-empty")
        key = episodic_key(query, subtask, context)
        emb = self.embedder.embed(key)
        with self._lock:
            rec = EpisodicRecord(self._next_id(), key, emb, plan, self._clock(), dict(provenance or {}))
            self._append_line(rec)
            self._index(rec)
        return rec.id

    # -- reads ---------------------------------------------------------------

    @property
    def records(self) -> tuple[Record, ...]:
        return tuple(self._records)

    def __len__(self):
        return len(self._records)

    def search(self, query_text: str, k: int = 1, min_similarity: float | None = None) -> list[tuple[Record, float]]:
        if k < 1:
            raise ValueError("k must be >= 1")
        self.read_count += 1
        with self._lock:
            n = len(self._records)
            records, matrix, norms = self._records[:n], self._buf[:n], self._norm_buf[:n]
        if not records:
            return []
        q = np.asarray(self.embedder.embed(query_text), dtype=float)
        qn = math.sqrt(float(q @ q))
        dots = matrix @ q
        denom = norms * qn
        scores = np.divide(dots, denom, out=np.zeros_like(dots), where=denom != 0)
        order = sorted(range(len(records)), key=lambda i: (-scores[i], records[i].created_at, records[i].id))
        hits = [(records[i], float(scores[i])) for i in order]
        if min_similarity is not None:
            hits = [h for h in hits if h[1] >= min_similarity]
        return hits[:k]

    def retrieve(self, query_text: str, k: int = 1, min_similarity: float | None = None) -> list[Record]:
        return [rec for rec, _ in self.search(query_text, k, min_similarity)]

    def close(self):
        # every write is flushed and closed on append; nothing buffered here
        pass

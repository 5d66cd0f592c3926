"""The manager: query formulation, knowledge retrieval and fusion, subtask planning."""
from __future__ import annotations

import logging
import re

from deskagent import prompts
from deskagent.aci.tree import Observation
from deskagent.config import RetrievalToggles
from deskagent.errors import ModelError, PlanParseError
from deskagent.llm import ChatMessage, ModelClient, fingerprint, reply_or_raise, strip_fences
from deskagent.types import FusedKnowledge, Query, Subtask, SubtaskPlan, TaskSpec, WebKnowledge

log = logging.getLogger(__name__)

_NUMBERED = re.compile(r"^\s*(\d+)[.)]\s")
_ITEM = re.compile(r"^\s*(\d+)[.)]\s*TITLE:\s*(?P<title>.*?)\s*CONTEXT:\s?(?P<context>.*)$", re.IGNORECASE)


def parse_plan(text: str) -> tuple[Subtask, ...]:
    """Parse ``N. TITLE: ... CONTEXT: ...`` items; unnumbered lines continue the context."""
    items: list[list[str]] = []
    for line in strip_fences(text).splitlines():
        if not line.strip():
            continue
        if _NUMBERED.match(line):
            m = _ITEM.match(line)
            if m is None:
                raise PlanParseError(f"item without TITLE/CONTEXT: {line.strip()!r}")
            if int(m.group(1)) != len(items) + 1:
                raise PlanParseError(f"items must be numbered 1..n, got {m.group(1)} at position {len(items) + 1}")
            if not m["title"]:
                raise PlanParseError(f"item {m.group(1)} has an empty title")
            items.append([m["title"], m["context"].strip()])
        elif items:
            items[-1][1] = (items[-1][1] + "\n" + line.rstrip()).strip("\n")
    if not items:
        raise PlanParseError("no numbered subtasks found")
    return tuple(Subtask(t, c, i) for i, (t, c) in enumerate(items))


def render_plan(subtasks) -> str:
    return "\n".join(f"{i + 1}. TITLE: {s.title} CONTEXT: {s.context}" for i, s in enumerate(subtasks))


class Manager:
    def __init__(
        self,
        client: ModelClient,
        search,
        narrative_store=None,
        tracer=None,
        toggles: RetrievalToggles | None = None,
        narrative_k: int = 1,
        min_similarity: float | None = None,
    ):
        self.client = client
        self.search = search
        self.narrative_store = narrative_store
        self.tracer = tracer
        self.toggles = toggles or RetrievalToggles()
        self.narrative_k = narrative_k
        self.min_similarity = min_similarity

    def _emit(self, kind, payload):
        if self.tracer is not None:
            self.tracer.emit(kind, payload)

    def formulate_query(self, task: TaskSpec, obs: Observation) -> Query:
        reply = self.client.complete(prompts.query_prompt(task.instruction, obs), purpose="query")
        text = reply_or_raise(reply, "query").strip().strip('"').strip()
        return Query(reply_or_raise(text, "query"))

    def retrieve_web(self, query: Query) -> WebKnowledge:
        if not self.toggles.web:
            return WebKnowledge()
        source = getattr(self.search, "name", "search")
        try:
            text = self.search.search(query.text) or ""
        except Exception as exc:  # search must never sink a run
            log.warning("web search failed: %s", exc)
            self._emit("warning", {"source": "web", "error": str(exc)[:200]})
            text = ""
        self._emit("retrieval", {"source": "web", "query_digest": fingerprint(query.text), "chars": len(text)})
        return WebKnowledge(text.strip(), source)

    def retrieve_narrative(self, query: Query) -> list:
        if not self.toggles.narrative or self.narrative_store is None:
            return []
        hits = self.narrative_store.search(query.text, self.narrative_k, self.min_similarity)
        self._emit("retrieval", {
            "source": "narrative",
            "query_digest": fingerprint(query.text),
            "hits": [r.id for r, _ in hits],
            "scores": [round(s, 6) for _, s in hits],
        })
        return [r for r, _ in hits]

    def fuse(self, narrative, web: WebKnowledge, query: Query | None = None) -> FusedKnowledge:
        """Fuse retrieved narrative records with web knowledge.

        ``narrative`` is a list of records (or ``(summary, outcome)`` pairs).
        With nothing to fuse, no model call is made.
        """
        pairs = [(r.summary, r.outcome) if hasattr(r, "summary") else tuple(r) for r in narrative]
        pairs = [(s, o) for s, o in pairs if s.strip()]
        if not pairs and not web.text.strip():
            return FusedKnowledge("")
        question = query.text if query else ""
        reply = self.client.complete(prompts.fusion_prompt(question, pairs, web.text), purpose="fusion")
        return FusedKnowledge(reply_or_raise(reply, "fusion"))

    def plan_subtasks(self, task: TaskSpec, obs: Observation, fused: FusedKnowledge, failure_note: str = "", completed=()) -> SubtaskPlan:
        messages = prompts.plan_prompt(task.instruction, obs, fused.text, failure_note, completed)
        reply = self.client.complete(messages, purpose="plan")
        try:
            subtasks = parse_plan(reply)
        except PlanParseError as exc:
            self._emit("warning", {"source": "plan", "error": str(exc)})
            retry = messages + [ChatMessage("assistant", reply or "(empty)"), prompts.correction_message(str(exc), prompts.PLAN_FORMAT)]
            subtasks = parse_plan(self.client.complete(retry, purpose="plan-retry"))
        plan = SubtaskPlan(subtasks, fused.text)
        self._emit("plan", {"subtasks": [s.title for s in plan]})
        return plan

    def _pipeline(self, task, obs, failure_note="", completed=()):
        query = self.formulate_query(task, obs)
        web = self.retrieve_web(query)
        narrative = self.retrieve_narrative(query)
        fused = self.fuse(narrative, web, query)
        plan = self.plan_subtasks(task, obs, fused, failure_note, completed)
        return query, plan

    def plan(self, task: TaskSpec, obs: Observation) -> tuple[Query, SubtaskPlan]:
        return self._pipeline(task, obs)

    def replan(self, task: TaskSpec, obs: Observation, failure_note: str, completed=()) -> tuple[Query, SubtaskPlan]:
        """Plan again from the current screen. Completed subtask titles are dropped
        from the new queue so finished work is never re-entered."""
        completed = list(completed)
        self._emit("replan", {"failure_note_digest": fingerprint(failure_note), "completed": completed})
        query, plan = self._pipeline(task, obs, failure_note, completed)
        done = set(completed)
        kept = [s for s in plan if s.title not in done]
        subtasks = tuple(Subtask(s.title, s.context, i) for i, s in enumerate(kept))
        return query, SubtaskPlan(subtasks, plan.provenance)


__all__ = ["Manager", "ModelError", "PlanParseError", "RetrievalToggles", "parse_plan", "render_plan"]

"""The worker: runs one subtask as an episode of single-action steps."""
from __future__ import annotations

import logging
import re

from deskagent import prompts
from deskagent.aci import (
    ActionSyntaxError,
    Done,
    EventScript,
    Fail,
    Observation,
    SaveToBuffer,
    compile_action,
    parse_action,
    validate_action,
)
from deskagent.errors import EnvError, ModelError, ResponseParseError
from deskagent.llm import ChatMessage, ModelClient, fingerprint, strip_fences
from deskagent.memory.store import episodic_key
from deskagent.types import (
    Query,
    Reflection,
    StructuredResponse,
    Subtask,
    TaskSpec,
    Trajectory,
    TrajectoryStep,
    format_steps,
)

log = logging.getLogger(__name__)

SECTIONS = ("status check", "observation analysis", "semantic action", "grounded action")
_HEADER = re.compile(
    r"^[\s#*>-]*(?:\d+[.)]\s*)?\**\s*(status check|observation analysis|semantic action|grounded action)\s*\**\s*:\s*",
    re.IGNORECASE | re.MULTILINE,
)


def extract_call(text: str) -> str:
    """Return the first balanced ``agent.<name>(...)`` expression in ``text``."""
    start = text.find("agent.")
    if start < 0:
        raise ResponseParseError("no agent.<primitive>(...) call in the grounded action")
    depth, quote, i = 0, None, start
    while i < len(text):
        ch = text[i]
        if quote:
            if ch == "\\":
                i += 1
            elif ch == quote:
                quote = None
        elif ch in "\"'":
            quote = ch
        elif ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth == 0:
                return text[start : i + 1]
        i += 1
    raise ResponseParseError("unbalanced parentheses in the grounded action")


def parse_response(text: str) -> StructuredResponse:
    """Split a reply into the four sections and parse the grounded action."""
    matches = list(_HEADER.finditer(text))
    found: dict[str, str] = {}
    for m, nxt in zip(matches, matches[1:] + [None]):
        name = m.group(1).lower()
        if name not in found:
            found[name] = text[m.end() : nxt.start() if nxt else len(text)].strip()
    missing = [s for s in SECTIONS if s not in found]
    if missing:
        raise ResponseParseError("missing section(s): " + ", ".join(s.upper() for s in missing))
    try:
        action = parse_action(extract_call(strip_fences(found["grounded action"])))
    except ActionSyntaxError as exc:
        raise ResponseParseError(str(exc)) from exc
    return StructuredResponse(found["status check"], found["observation analysis"], found["semantic action"], action, text)


def render_history(steps, window: int = 5) -> str:
    """Older steps as one-line digests, the last ``window`` responses verbatim."""
    if not steps:
        return ""
    older, recent = steps[:-window] if window else steps, steps[-window:] if window else []
    parts = []
    if older:
        parts.append("Earlier steps:\n" + format_steps(older))
    for s in recent:
        body = s.response.raw.strip() or s.response.grounded_action.to_literal()
        parts.append(f"Step {s.step_index} [{s.env_result}]:\n{body}")
    return "\n\n".join(parts)


def failure_note(traj: Trajectory, last_k: int = 5) -> str:
    """What the manager sees when replanning after a failed subtask."""
    lines = [f"Subtask: {traj.subtask.title}", f"Ended with: {traj.terminal}"]
    if traj.steps:
        r = traj.steps[-1].response
        lines.append(f"Worker rationale: {r.semantic_action} {r.observation_analysis}".strip())
        lines.append("Last steps:\n" + format_steps(traj.steps[-last_k:]))
    return "\n".join(lines)


class Worker:
    def __init__(
        self,
        client: ModelClient,
        episodic_store=None,
        tracer=None,
        use_episodic: bool = True,
        reflection_interval: int = 3,
        history_window: int = 5,
        episodic_k: int = 1,
        min_similarity: float | None = None,
    ):
        if reflection_interval < 1:
            raise ValueError("reflection_interval must be >= 1")
        self.client = client
        self.episodic_store = episodic_store
        self.tracer = tracer
        self.use_episodic = use_episodic
        self.reflection_interval = reflection_interval
        self.history_window = history_window
        self.episodic_k = episodic_k
        self.min_similarity = min_similarity

    def _emit(self, kind, payload):
        if self.tracer is not None:
            self.tracer.emit(kind, payload)

    def retrieve_episodic_experience(self, query: Query, subtask: Subtask) -> str:
        if not self.use_episodic or self.episodic_store is None:
            return ""
        key = episodic_key(query.text, subtask.title, subtask.context)
        hits = self.episodic_store.search(key, self.episodic_k, self.min_similarity)
        self._emit("retrieval", {
            "source": "episodic",
            "query_digest": fingerprint(key),
            "hits": [r.id for r, _ in hits],
            "scores": [round(s, 6) for _, s in hits],
        })
        return "\n\n".join(r.plan for r, _ in hits)

    def reflect(self, task: TaskSpec, traj: Trajectory) -> Reflection:
        if not traj.steps:
            raise ValueError("nothing to reflect on before the first step")
        messages = prompts.reflection_prompt(task.instruction, traj.subtask, format_steps(traj.steps))
        try:
            return Reflection(self.client.complete(messages, purpose="reflection"))
        except ModelError as exc:
            log.warning("reflection failed, continuing without it: %s", exc)
            self._emit("warning", {"source": "reflection", "error": str(exc)[:200]})
            return Reflection("")

    def generate_step(
        self,
        task: TaskSpec,
        subtask: Subtask,
        obs: Observation,
        experience: str = "",
        reflection: Reflection = Reflection(),
        history=(),
        feedback: str = "",
        remaining=(),
        buffer: str = "",
    ) -> StructuredResponse:
        messages = prompts.action_prompt(
            task.instruction, subtask, list(remaining), obs, experience, reflection.text,
            render_history(list(history), self.history_window), feedback, buffer,
        )
        reply = self.client.complete(messages, purpose="action")
        try:
            return parse_response(reply)
        except ResponseParseError as exc:
            self._emit("warning", {"source": "action", "error": str(exc)})
            retry = messages + [ChatMessage("assistant", reply or "(empty)"), prompts.correction_message(str(exc), prompts.RESPONSE_FORMAT)]
            return parse_response(self.client.complete(retry, purpose="action-retry"))

    def run_episode(self, task: TaskSpec, query: Query, subtask: Subtask, env, budget: int, remaining=(), buffer: list | None = None) -> Trajectory:
        """Observe, generate, validate, compile, apply; one env action per iteration.

        Rejected actions (failed validation) use up budget but never reach the
        environment. ``buffer`` is the run-scoped save_to_buffer list.
        """
        if budget < 1:
            raise ValueError("budget must be >= 1")
        buffer = buffer if buffer is not None else []
        traj = Trajectory(subtask)
        experience = self.retrieve_episodic_experience(query, subtask)
        reflection = Reflection()
        feedback = ""
        try:
            obs = env.observe()
        except Exception as exc:
            raise EnvError(f"observe failed: {exc}", trajectory=traj) from exc

        while len(traj.steps) < budget:
            t = len(traj.steps)
            if t and t % self.reflection_interval == 0:
                reflection = self.reflect(task, traj)
            resp = self.generate_step(task, subtask, obs, experience, reflection, traj.steps, feedback, remaining, "\n".join(buffer))
            action = resp.grounded_action
            digest = fingerprint(obs.linearized)
            violations = validate_action(action, obs)
            if violations:
                traj.steps.append(TrajectoryStep(t, digest, resp, EventScript(), "rejected", tuple(violations)))
                self._emit("action", {"subtask": subtask.index, "step": t, "action": action.to_literal(), "env_result": "rejected", "violations": violations})
                feedback = "\n".join(violations)
                continue
            feedback = ""
            script = compile_action(action, obs)
            try:
                result = env.step(script)
            except Exception as exc:
                raise EnvError(f"env step failed: {exc}", trajectory=traj) from exc
            traj.steps.append(TrajectoryStep(t, digest, resp, script, "applied"))
            self._emit("action", {"subtask": subtask.index, "step": t, "action": action.to_literal(), "env_result": "applied"})
            self._emit("env-step", {"events": len(script), "script_digest": fingerprint(script.to_text()) if len(script) else ""})
            obs = result.observation
            if isinstance(action, SaveToBuffer):
                buffer.append(action.text)
            if isinstance(action, Done):
                traj.terminal = "done"
                break
            if isinstance(action, Fail):
                traj.terminal = "fail"
                break
        if traj.terminal is None:
            traj.terminal = "step_limit"
        self._emit("episode", {"subtask": subtask.index, "title": subtask.title, "terminal": traj.terminal, "steps": len(traj.steps)})
        return traj

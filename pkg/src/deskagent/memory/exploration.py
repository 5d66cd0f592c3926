"""Self-supervised exploration: generate practice tasks and run them to seed memory."""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

from deskagent import prompts
from deskagent.config import RetrievalToggles
from deskagent.errors import ModelError
from deskagent.llm import ModelClient, strip_fences

log = logging.getLogger(__name__)

MODES = ("env_independent", "env_aware")
_BULLET = re.compile(r"^\s*(?:\d+[.)]|[-*•])\s*")


def parse_task_list(text: str) -> list[str]:
    tasks = []
    for line in strip_fences(text).splitlines():
        if not _BULLET.match(line):
            continue
        item = _BULLET.sub("", line).strip().strip('"').strip()
        if item:
            tasks.append(item)
    return tasks


def generate_exploration_tasks(client: ModelClient, mode: str, n: int, apps=(), observation=None) -> list[str]:
    """One model call producing up to ``n`` practice tasks.

    ``env_independent`` asks for the most common tasks of ``apps``;
    ``env_aware`` shows the model a starting observation.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if n < 1:
        raise ValueError("n must be >= 1")
    if mode == "env_aware" and observation is None:
        raise ValueError("env_aware exploration needs an observation")
    reply = client.complete(prompts.task_generation_prompt(mode, n, apps, observation), purpose="task-generation")
    tasks = parse_task_list(reply)
    if not tasks:
        raise ModelError("task generator returned no tasks", kind="empty-reply")
    if len(tasks) < n:
        log.warning("task generator returned %d of %d requested tasks", len(tasks), n)
    return tasks[:n]


@dataclass
class BootstrapReport:
    rows: list[dict] = field(default_factory=list)
    narrative_before: int = 0
    narrative_after: int = 0
    episodic_before: int = 0
    episodic_after: int = 0

    @property
    def errors(self) -> int:
        return sum(1 for r in self.rows if r.get("error"))


def bootstrap(agent, tasks) -> BootstrapReport:
    """Run each task with only web knowledge, saving experience as usual.

    ``agent`` needs ``run_task(task, toggles=...)``, ``narrative`` and
    ``episodic`` stores, and a ``config`` with a ``toggles.web`` flag. One
    task's failure never stops the batch.
    """
    toggles = RetrievalToggles(web=agent.config.toggles.web, narrative=False, episodic=False)
    report = BootstrapReport(narrative_before=len(agent.narrative), episodic_before=len(agent.episodic))
    for task in tasks:
        try:
            result = agent.run_task(task, toggles=toggles)
            report.rows.append({"id": task.id, "instruction": task.instruction, "outcome": result.outcome, "trace": str(result.trace_path or "")})
        except Exception as exc:
            log.warning("exploration task %s failed: %s", task.id, exc)
            report.rows.append({"id": task.id, "instruction": task.instruction, "outcome": "failure", "error": str(exc)})
    report.narrative_after = len(agent.narrative)
    report.episodic_after = len(agent.episodic)
    return report

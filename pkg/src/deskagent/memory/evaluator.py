"""Self-evaluation: turn finished episodes and tasks into textual summaries."""
from __future__ import annotations

import re
from typing import Sequence

from deskagent import prompts
from deskagent.errors import ModelError
from deskagent.llm import ModelClient, reply_or_raise
from deskagent.types import TaskSpec, Trajectory, format_steps

_CALL = re.compile(r"`?agent\.\w+\((?:[^()]|\([^()]*\))*\)`?")


def trajectory_text(traj: Trajectory) -> str:
    return format_steps(traj.steps)


def summarize_episode(client: ModelClient, task: TaskSpec, traj: Trajectory) -> str:
    """Strategy summary of a subtask that ended DONE; stored verbatim in episodic memory."""
    if traj.terminal != "done":
        raise ValueError(f"only DONE episodes are summarized, got {traj.terminal}")
    messages = prompts.episode_summary_prompt(task.instruction, traj.subtask, trajectory_text(traj))
    return reply_or_raise(client.complete(messages, purpose="episode-summary"), "episode summary")


def strip_grounded_actions(text: str) -> str:
    return re.sub(r"[ \t]{2,}", " ", _CALL.sub("", text)).strip()


def task_outcome(all_subtasks_done: bool, evaluator_passed: bool | None) -> str:
    if all_subtasks_done and evaluator_passed is not False:
        return "success"
    return "failure"


def summarize_task(
    client: ModelClient,
    task: TaskSpec,
    query: str,
    trajectories: Sequence[Trajectory],
    all_subtasks_done: bool,
    evaluator_passed: bool | None = None,
) -> tuple[str, str]:
    """Return ``(summary, outcome)`` for a terminated task.

    The summary has grounded ``agent.*(...)`` calls removed.
    """
    outcomes = "\n".join(f"- {t.subtask.title}: {t.terminal}" for t in trajectories)
    if not all_subtasks_done:
        outcomes += "\n- task stopped before all subtasks finished"
    steps = "\n\n".join(f"[{t.subtask.title}]\n{trajectory_text(t)}" for t in trajectories)
    reply = client.complete(prompts.task_summary_prompt(task.instruction, query, outcomes, steps), purpose="task-summary")
    summary = strip_grounded_actions(reply_or_raise(reply, "task summary"))
    if not summary:
        raise ModelError("task summary was empty after removing grounded actions", kind="empty-reply")
    return summary, task_outcome(all_subtasks_done, evaluator_passed)

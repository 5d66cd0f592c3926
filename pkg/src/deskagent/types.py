"""Plain data passed between the manager, workers and the self-evaluator."""
from __future__ import annotations

from dataclasses import dataclass, field

from deskagent.aci.actions import Action, Done, Fail
from deskagent.aci.events import EventScript


@dataclass(frozen=True)
class TaskSpec:
    instruction: str
    id: str = "task"
    max_steps: int = 50

    def __post_init__(self):
        if not self.instruction.strip():
            raise ValueError("task instruction is empty")
        if self.max_steps <= 0:
            raise ValueError("max_steps must be positive")


@dataclass(frozen=True)
class Query:
    text: str

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("query is empty")

    def __str__(self):
        return self.text


@dataclass(frozen=True)
class WebKnowledge:
    text: str = ""
    source: str = ""


@dataclass(frozen=True)
class FusedKnowledge:
    text: str = ""


@dataclass(frozen=True)
class Subtask:
    title: str
    context: str = ""
    index: int = 0


@dataclass(frozen=True)
class SubtaskPlan:
    subtasks: tuple[Subtask, ...]
    provenance: str = ""

    def __len__(self):
        return len(self.subtasks)

    def __iter__(self):
        return iter(self.subtasks)

    def __getitem__(self, i):
        return self.subtasks[i]


@dataclass(frozen=True)
class StructuredResponse:
    status_check: str
    observation_analysis: str
    semantic_action: str
    grounded_action: Action
    raw: str = ""


@dataclass(frozen=True)
class TrajectoryStep:
    step_index: int
    observation_digest: str
    response: StructuredResponse
    event_script: EventScript = EventScript()
    env_result: str = "applied"  # applied | rejected
    violations: tuple[str, ...] = ()


@dataclass
class Trajectory:
    subtask: Subtask
    steps: list[TrajectoryStep] = field(default_factory=list)
    terminal: str | None = None  # done | fail | step_limit

    @property
    def applied_steps(self) -> int:
        return sum(1 for s in self.steps if s.env_result == "applied")

    @property
    def last_action(self) -> Action | None:
        return self.steps[-1].response.grounded_action if self.steps else None

    def check_terminal(self) -> bool:
        last = self.last_action
        if self.terminal == "done":
            return isinstance(last, Done)
        if self.terminal == "fail":
            return isinstance(last, Fail)
        return self.terminal == "step_limit" and not isinstance(last, (Done, Fail))


@dataclass(frozen=True)
class Reflection:
    text: str = ""


def step_line(step: TrajectoryStep) -> str:
    r = step.response
    line = f"step {step.step_index}: {r.semantic_action} -> {r.grounded_action.to_literal()} [{step.env_result}]"
    if step.violations:
        line += " (" + "; ".join(step.violations) + ")"
    return line


def format_steps(steps) -> str:
    return "\n".join(step_line(s) for s in steps)

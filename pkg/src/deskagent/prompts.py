"""Prompt templates. Each system prompt opens with a unique ``### NAME`` header
so scripted backends can route on it."""
from __future__ import annotations

from typing import Iterable, Sequence

from deskagent.aci.tree import Observation
from deskagent.llm import ChatMessage

QUERY = "### QUERY FORMULATION"
FUSION = "### EXPERIENCE FUSION"
PLAN = "### SUBTASK PLANNING"
ACTION = "### ACTION GENERATION"
REFLECTION = "### TRAJECTORY REFLECTION"
EPISODE_SUMMARY = "### SUBTASK SUMMARY"
TASK_SUMMARY = "### TASK SUMMARY"
TASK_GENERATION = "### TASK GENERATION"
CORRECTION = "### FORMAT CORRECTION"

ACTION_SPACE = """\
agent.click(element_id, num_clicks=1, button_type="left", hold_keys=[])  click an element; button_type is left, right or middle
agent.type(text, element_id=None, overwrite=False, enter=False)  type into an element, or the focused element when element_id is omitted
agent.scroll(element_id, clicks)  scroll within an element; positive clicks scroll up
agent.hotkey(keys)  press a key combination, e.g. agent.hotkey(["ctrl", "c"])
agent.hold_and_press(hold_keys, press_keys)  hold some keys while pressing others
agent.drag_and_drop(drag_from_id, drop_on_id, hold_keys=[])  drag one element onto another
agent.save_to_buffer(text)  remember text for later steps
agent.switch_applications(app_code)  bring another open application to the front
agent.wait(time)  wait for the given number of seconds
agent.done()  the current subtask is complete
agent.fail()  the current subtask cannot be completed"""

PLAN_FORMAT = """\
Reply with a numbered list, one subtask per item, in execution order:
1. TITLE: <short subtask title> CONTEXT: <details needed to carry it out>
2. TITLE: ... CONTEXT: ..."""

RESPONSE_FORMAT = """\
Reply with exactly these four sections:
STATUS CHECK: <did the previous action have the intended effect?>
OBSERVATION ANALYSIS: <what the current screen shows that matters>
SEMANTIC ACTION: <the next action in plain words>
GROUNDED ACTION: <exactly one agent.<primitive>(...) call>"""


def _msgs(system: str, user: str) -> list[ChatMessage]:
    return [ChatMessage("system", system), ChatMessage("user", user)]


def _block(title: str, body: str) -> str:
    return f"{title}:\n{body.strip() if body and body.strip() else '(none)'}"


def query_prompt(instruction: str, obs: Observation) -> list[ChatMessage]:
    system = (
        f"{QUERY}\nYou turn a desktop task into a single web-search question of the form "
        '"How to do X", taking the current screen into account. Reply with the question only.'
    )
    user = "\n\n".join([_block("Task", instruction), _block("Current screen (accessibility tree)", obs.render())])
    return _msgs(system, user)


def fusion_prompt(query: str, narrative: Sequence[tuple[str, str]], web: str) -> list[ChatMessage]:
    system = (
        f"{FUSION}\nCombine past task experience and web knowledge into one concise guideline "
        "for planning the task. Prefer strategies from successful experience; treat failed "
        "experience as a warning."
    )
    past = "\n\n".join(f"[{outcome}] {summary}" for summary, outcome in narrative)
    user = "\n\n".join([_block("Question", query), _block("Past task experience", past), _block("Web knowledge", web)])
    return _msgs(system, user)


def plan_prompt(
    instruction: str,
    obs: Observation,
    fused: str,
    failure_note: str = "",
    completed: Iterable[str] = (),
) -> list[ChatMessage]:
    system = f"{PLAN}\nBreak the task into an ordered queue of subtasks for a GUI agent.\n{PLAN_FORMAT}"
    parts = [_block("Task", instruction), _block("Guideline", fused), _block("Current screen (accessibility tree)", obs.render())]
    done = list(completed)
    if done or failure_note:
        parts.append(_block("Subtasks already completed (do not repeat them)", "\n".join(f"- {t}" for t in done)))
        parts.append(_block("Previous attempt failed", failure_note))
    return _msgs(system, "\n\n".join(parts))


def action_prompt(
    instruction: str,
    subtask,
    remaining: Sequence[str],
    obs: Observation,
    experience: str,
    reflection: str,
    history: str,
    feedback: str = "",
    buffer: str = "",
) -> list[ChatMessage]:
    system = (
        f"{ACTION}\nYou control a desktop through one action per step. "
        "Refer to elements by their [tag] numbers.\n\nAvailable actions:\n"
        f"{ACTION_SPACE}\n\n{RESPONSE_FORMAT}"
    )
    parts = [
        _block("Task", instruction),
        _block("Current subtask", f"{subtask.title}\n{subtask.context}"),
        _block("Later subtasks", "\n".join(f"- {t}" for t in remaining)),
        _block("Similar subtask experience", experience),
        _block("Reflection", reflection),
        _block("Previous steps", history),
    ]
    if buffer:
        parts.append(_block("Saved buffer", buffer))
    if feedback:
        parts.append(_block("Your last action was rejected", feedback))
    parts.append(_block("Current screen (accessibility tree)", obs.render()))
    return _msgs(system, "\n\n".join(parts))


def reflection_prompt(instruction: str, subtask, trajectory: str) -> list[ChatMessage]:
    system = (
        f"{REFLECTION}\nReview the agent's steps so far. If it is repeating itself or stuck, "
        "suggest a different strategy; otherwise confirm briefly. Reply with advice only."
    )
    user = "\n\n".join([_block("Task", instruction), _block("Subtask", subtask.title), _block("Steps", trajectory)])
    return _msgs(system, user)


def episode_summary_prompt(instruction: str, subtask, trajectory: str) -> list[ChatMessage]:
    system = (
        f"{EPISODE_SUMMARY}\nThe subtask below was completed. Summarize the strategy as a short "
        "plan, keeping the exact agent actions that worked so it can be reused."
    )
    user = "\n\n".join([
        _block("Task", instruction),
        _block("Subtask", f"{subtask.title}\n{subtask.context}"),
        _block("Steps", trajectory),
    ])
    return _msgs(system, user)


def task_summary_prompt(instruction: str, query: str, outcomes: str, trajectory: str) -> list[ChatMessage]:
    system = (
        f"{TASK_SUMMARY}\nSummarize how the whole task went: the plan, what worked and what did "
        "not. Do not include specific agent.<primitive>(...) calls or element numbers."
    )
    user = "\n\n".join([
        _block("Task", instruction),
        _block("Question", query),
        _block("Subtask outcomes", outcomes),
        _block("Steps", trajectory),
    ])
    return _msgs(system, user)


def task_generation_prompt(mode: str, n: int, apps: Sequence[str] = (), obs: Observation | None = None) -> list[ChatMessage]:
    system = (
        f"{TASK_GENERATION}\nPropose realistic desktop tasks for an agent to practise on. "
        f"Reply with a numbered list of exactly {n} tasks, one per line."
    )
    if mode == "env_aware":
        user = _block("Starting screen (accessibility tree)", obs.render()) + (
            f"\n\nPropose {n} different tasks that can be done starting from this screen."
        )
    else:
        user = _block("Applications", "\n".join(f"- {a}" for a in apps)) + (
            f"\n\nList the {n} most common tasks users perform with these applications."
        )
    return _msgs(system, user)


def correction_message(error: str, expected: str) -> ChatMessage:
    return ChatMessage("user", f"{CORRECTION}\nYour reply could not be parsed: {error}\n{expected}")

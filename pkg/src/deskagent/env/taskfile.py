"""Simulated-task documents (JSON).

A task file looks like::

    {
      "schema_version": 1,
      "id": "thunderbird-remove-account",
      "instruction": "Help me to remove the account ...",
      "focused_app": "thunderbird",
      "apps": {
        "thunderbird": {
          "tree": [{"key": "win", "role": "window", "name": "...", "bbox": [0, 0, 1280, 800],
                    "children": [...]}],
          "ocr": [{"text": "Inbox", "bbox": [300, 100, 60, 20]}],
          "hotkeys": {"ctrl+h": [{"op": "show", "key": "find_dialog"}]},
          "focus": "search_box"
        }
      },
      "evaluator": [{"rule": "element-absent", "app": "thunderbird", "key": "acct_item"}],
      "script": "thunderbird.script.jsonl"
    }

Node fields: key, role, name, bbox, states, value, hidden, editable,
mode (append | overwrite), children, and transition lists on_click,
on_right_click, on_type, on_enter, on_drop. Each transition is a list of
effects ``{"op": ..., "key": ..., "app": ...}`` with op one of show, hide,
remove, set_state, clear_state, toggle_state, set_value, set_name, focus,
switch_app. ``tree_text`` (the indented text form) may replace ``tree``
for apps without transitions. ``focus`` names the element that
holds keyboard focus when the app is first shown; each app keeps its own
focus across switches.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from deskagent.errors import TaskLoadError

SCHEMA_VERSION = 1
EFFECT_OPS = ("show", "hide", "remove", "set_state", "clear_state", "toggle_state", "set_value", "set_name", "focus", "switch_app")
TRANSITIONS = ("on_click", "on_right_click", "on_type", "on_enter", "on_drop")
RULES = ("element-exists", "element-absent", "attribute-equals", "buffer-equals")


@dataclass(frozen=True)
class EnvTask:
    id: str
    instruction: str
    initial_state: dict
    evaluator: tuple = ()
    max_steps: int | None = None
    script: str | None = None
    path: str | None = None

    def with_instruction(self, task_id: str, instruction: str, evaluator=()) -> "EnvTask":
        """Same starting desktop, different goal (used for exploration tasks)."""
        return EnvTask(task_id, instruction, self.initial_state, tuple(evaluator), self.max_steps, None, self.path)


def parse_task(doc: dict, path: str | Path | None = None) -> EnvTask:
    if not isinstance(doc, dict):
        raise TaskLoadError("task document must be a JSON object")
    version = doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise TaskLoadError(f"unsupported task schema_version {version}")
    for key in ("id", "instruction", "apps"):
        if key not in doc:
            raise TaskLoadError(f"task is missing {key!r}")
    if not str(doc["instruction"]).strip():
        raise TaskLoadError("task instruction is empty")
    rules = doc.get("evaluator", [])
    if not isinstance(rules, list):
        raise TaskLoadError("evaluator must be a list of rules")
    for rule in rules:
        if not isinstance(rule, dict) or rule.get("rule") not in RULES:
            raise TaskLoadError(f"unknown evaluator rule {rule!r}")
    script = doc.get("script")
    if script and path is not None:
        script = str((Path(path).parent / script).resolve())
    state = {k: doc[k] for k in ("apps", "focused_app") if k in doc}
    task = EnvTask(
        id=str(doc["id"]),
        instruction=str(doc["instruction"]),
        initial_state=state,
        evaluator=tuple(rules),
        max_steps=doc.get("max_steps"),
        script=script,
        path=str(path) if path else None,
    )
    # build once so structural problems surface at load time
    from deskagent.env.sim import build_state

    build_state(task.initial_state)
    return task


def load_task(path) -> EnvTask:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise TaskLoadError(f"cannot read task file {path}: {exc}") from exc
    return parse_task(doc, path)


def load_task_dir(directory) -> list[EnvTask]:
    """All ``*.task.json`` files in a directory, sorted by file name."""
    d = Path(directory)
    if d.is_file():
        return [load_task(d)]
    paths = sorted(d.glob("*.task.json"))
    if not paths:
        raise TaskLoadError(f"no *.task.json files in {directory}")
    return [load_task(p) for p in paths]

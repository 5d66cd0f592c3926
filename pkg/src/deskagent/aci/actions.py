"""The bounded action vocabulary and its ``agent.<primitive>(...)`` literal form."""
from __future__ import annotations

import ast
import json
import math
from dataclasses import dataclass, fields
from typing import ClassVar

from deskagent.aci.tree import Observation

BUTTONS = ("left", "right", "middle")


class ActionSyntaxError(ValueError):
    """A grounded-action literal does not parse into a known primitive."""


@dataclass(frozen=True)
class Action:
    kind: ClassVar[str] = ""

    def element_ids(self) -> tuple[int, ...]:
        return ()

    def to_literal(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class Click(Action):
    kind: ClassVar[str] = "click"
    element_id: int
    num_clicks: int = 1
    button_type: str = "left"
    hold_keys: tuple[str, ...] = ()

    def element_ids(self):
        return (self.element_id,)

    def to_literal(self):
        extra = f", hold_keys={_lit(list(self.hold_keys))}" if self.hold_keys else ""
        return f"agent.click({self.element_id}, {self.num_clicks}, {_lit(self.button_type)}{extra})"


@dataclass(frozen=True)
class Type(Action):
    """Type ``text``; with no element_id the text goes to the current focus."""

    kind: ClassVar[str] = "type"
    text: str
    element_id: int | None = None
    overwrite: bool = False
    enter: bool = False

    def element_ids(self):
        return () if self.element_id is None else (self.element_id,)

    def to_literal(self):
        parts = [f"text={_lit(self.text)}"]
        if self.element_id is not None:
            parts.append(f"element_id={self.element_id}")
        if self.overwrite:
            parts.append("overwrite=True")
        if self.enter:
            parts.append("enter=True")
        return f"agent.type({', '.join(parts)})"


@dataclass(frozen=True)
class Scroll(Action):
    kind: ClassVar[str] = "scroll"
    element_id: int | None = None
    clicks: int = 0

    def element_ids(self):
        return () if self.element_id is None else (self.element_id,)

    def to_literal(self):
        if self.element_id is None:
            return f"agent.scroll(clicks={self.clicks})"
        return f"agent.scroll({self.element_id}, {self.clicks})"


@dataclass(frozen=True)
class Hotkey(Action):
    kind: ClassVar[str] = "hotkey"
    keys: tuple[str, ...]

    def to_literal(self):
        return f"agent.hotkey({_lit(list(self.keys))})"


@dataclass(frozen=True)
class HoldAndPress(Action):
    kind: ClassVar[str] = "hold_and_press"
    hold_keys: tuple[str, ...]
    press_keys: tuple[str, ...] = ()

    def to_literal(self):
        return f"agent.hold_and_press({_lit(list(self.hold_keys))}, {_lit(list(self.press_keys))})"


@dataclass(frozen=True)
class DragAndDrop(Action):
    kind: ClassVar[str] = "drag_and_drop"
    drag_from_id: int
    drop_on_id: int
    hold_keys: tuple[str, ...] = ()

    def element_ids(self):
        return (self.drag_from_id, self.drop_on_id)

    def to_literal(self):
        extra = f", hold_keys={_lit(list(self.hold_keys))}" if self.hold_keys else ""
        return f"agent.drag_and_drop({self.drag_from_id}, {self.drop_on_id}{extra})"


@dataclass(frozen=True)
class SaveToBuffer(Action):
    kind: ClassVar[str] = "save_to_buffer"
    text: str

    def to_literal(self):
        return f"agent.save_to_buffer({_lit(self.text)})"


@dataclass(frozen=True)
class SwitchApplications(Action):
    kind: ClassVar[str] = "switch_applications"
    app_code: str

    def to_literal(self):
        return f"agent.switch_applications({_lit(self.app_code)})"


@dataclass(frozen=True)
class Wait(Action):
    kind: ClassVar[str] = "wait"
    time: float

    def to_literal(self):
        return f"agent.wait({self.time!r})"


@dataclass(frozen=True)
class Done(Action):
    kind: ClassVar[str] = "done"

    def to_literal(self):
        return "agent.done()"


@dataclass(frozen=True)
class Fail(Action):
    kind: ClassVar[str] = "fail"

    def to_literal(self):
        return "agent.fail()"


PRIMITIVES: dict[str, type[Action]] = {
    cls.kind: cls
    for cls in (Click, Type, Scroll, Hotkey, HoldAndPress, DragAndDrop, SaveToBuffer, SwitchApplications, Wait, Done, Fail)
}

# expected python type per argument name; "keys" means list of strings
_ARG_TYPES = {
    "element_id": "optint",
    "num_clicks": int,
    "button_type": str,
    "hold_keys": "keys",
    "press_keys": "keys",
    "keys": "keys",
    "text": str,
    "overwrite": bool,
    "enter": bool,
    "clicks": int,
    "drag_from_id": int,
    "drop_on_id": int,
    "app_code": str,
    "time": "number",
}


def _lit(value) -> str:
    return json.dumps(value, ensure_ascii=False)


def _arg_value(node: ast.expr):
    # bare names (agent.click(38, 1, left)) are read as strings
    if isinstance(node, ast.Name):
        return {"True": True, "False": False, "None": None}.get(node.id, node.id)
    try:
        return ast.literal_eval(node)
    except ValueError as exc:
        raise ActionSyntaxError(f"argument is not a literal: {ast.unparse(node)}") from exc


def _coerce(name: str, value):
    expected = _ARG_TYPES[name]
    if expected == "keys":
        if isinstance(value, str):
            value = [value]
        if not isinstance(value, (list, tuple)) or not all(isinstance(k, str) for k in value):
            raise ActionSyntaxError(f"{name} must be a list of key names")
        return tuple(value)
    if expected == "optint":
        if value is None:
            return None
        expected = int
    if expected == "number":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ActionSyntaxError(f"{name} must be a number")
        return value
    if expected is int and (isinstance(value, bool) or not isinstance(value, int)):
        raise ActionSyntaxError(f"{name} must be an integer")
    if expected is not int and not isinstance(value, expected):
        raise ActionSyntaxError(f"{name} must be {expected.__name__}")
    return value


def parse_action(literal: str) -> Action:
    """Parse ``agent.click(41, 1, "left")``-style text into an Action.

    Arguments for done/fail are ignored. For ``type``, an (element_id, text)
    positional order is accepted as well as the canonical (text, element_id).
    """
    text = literal.strip().strip("`").strip()
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ActionSyntaxError(f"not a call expression: {literal!r}") from exc
    call = tree.body
    if not (
        isinstance(call, ast.Call)
        and isinstance(call.func, ast.Attribute)
        and isinstance(call.func.value, ast.Name)
        and call.func.value.id == "agent"
    ):
        raise ActionSyntaxError(f"expected agent.<primitive>(...): {literal!r}")
    name = call.func.attr
    cls = PRIMITIVES.get(name)
    if cls is None:
        raise ActionSyntaxError(f"unknown primitive {name!r}")
    if cls in (Done, Fail):
        return cls()

    names = [f.name for f in fields(cls)]
    positional = [_arg_value(a) for a in call.args]
    if cls is Type and len(positional) >= 2 and isinstance(positional[0], int) and isinstance(positional[1], str):
        positional[0], positional[1] = positional[1], positional[0]
    if len(positional) > len(names):
        raise ActionSyntaxError(f"too many arguments for {name}")
    kwargs = dict(zip(names, positional))
    for kw in call.keywords:
        if kw.arg is None or kw.arg not in names:
            raise ActionSyntaxError(f"unknown argument {kw.arg!r} for {name}")
        if kw.arg in kwargs:
            raise ActionSyntaxError(f"argument {kw.arg!r} given twice")
        kwargs[kw.arg] = _arg_value(kw.value)
    try:
        return cls(**{k: _coerce(k, v) for k, v in kwargs.items()})
    except TypeError as exc:
        raise ActionSyntaxError(f"{name}: {exc}") from exc


def validate_action(action: Action, obs: Observation) -> list[str]:
    """Return a list of violations; an empty list means the action is valid."""
    problems = []
    valid = obs.valid_element_ids
    for eid in action.element_ids():
        if eid not in valid:
            problems.append(f"unknown element_id {eid}: no element with that tag in the current observation")

    hold = getattr(action, "hold_keys", ())
    if any(not k for k in hold):
        problems.append("hold_keys contains an empty key name")

    if isinstance(action, Click):
        if action.num_clicks < 1:
            problems.append(f"num_clicks must be >= 1, got {action.num_clicks}")
        if action.button_type not in BUTTONS:
            problems.append(f"button_type must be one of {', '.join(BUTTONS)}, got {action.button_type!r}")
    elif isinstance(action, Hotkey):
        if not action.keys:
            problems.append("hotkey needs at least one key")
        elif any(not k for k in action.keys):
            problems.append("hotkey contains an empty key name")
    elif isinstance(action, HoldAndPress):
        if not action.hold_keys:
            problems.append("hold_and_press needs at least one hold key")
        if any(not k for k in action.press_keys):
            problems.append("press_keys contains an empty key name")
    elif isinstance(action, Scroll):
        if action.clicks == 0:
            problems.append("scroll clicks must be non-zero")
    elif isinstance(action, Wait):
        if not (math.isfinite(action.time) and action.time > 0):
            problems.append(f"wait time must be a positive duration, got {action.time}")
    elif isinstance(action, SwitchApplications):
        if not action.app_code:
            problems.append("app_code is empty")
        elif obs.apps and action.app_code not in obs.apps:
            problems.append(f"unknown app_code {action.app_code!r}; open applications: {', '.join(obs.apps)}")
    return problems

"""Compile one Action into a low-level input-event script.

Textual form, one event per line::

    pointer-move 60 52
    button-press left
    button-release left
    key-press ctrl
    key-release ctrl
    text-emit "cd /home/user"
    wheel -3
    app-activate "gimp"
    sleep 1000
    buffer-store "x"
"""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass

from deskagent.aci.actions import (
    Action,
    Click,
    Done,
    DragAndDrop,
    Fail,
    HoldAndPress,
    Hotkey,
    SaveToBuffer,
    Scroll,
    SwitchApplications,
    Type,
    Wait,
    validate_action,
)
from deskagent.aci.tree import Observation
from deskagent.errors import CompileError

_INT_ARGS = {"pointer-move": 2, "sleep": 1, "wheel": 1}
_NAME_ARGS = {"button-press", "button-release", "key-press", "key-release"}
_STR_ARGS = {"text-emit", "app-activate", "buffer-store"}
KINDS = frozenset(_INT_ARGS) | _NAME_ARGS | _STR_ARGS

SELECT_ALL = ("ctrl", "a")
DELETE_KEY = "backspace"
ENTER_KEY = "enter"


@dataclass(frozen=True)
class Event:
    kind: str
    args: tuple = ()

    def to_text(self) -> str:
        if self.kind in _STR_ARGS:
            return f"{self.kind} {json.dumps(self.args[0], ensure_ascii=False)}"
        return " ".join([self.kind, *map(str, self.args)])

    @classmethod
    def from_text(cls, line: str) -> "Event":
        kind, _, rest = line.strip().partition(" ")
        if kind in _STR_ARGS:
            return cls(kind, (json.loads(rest),))
        if kind in _NAME_ARGS:
            return cls(kind, (rest,))
        if kind in _INT_ARGS:
            args = tuple(int(v) for v in rest.split())
            if len(args) != _INT_ARGS[kind]:
                raise ValueError(f"bad argument count: {line!r}")
            return cls(kind, args)
        raise ValueError(f"unknown event kind: {line!r}")


@dataclass(frozen=True)
class EventScript:
    events: tuple[Event, ...] = ()

    def __len__(self):
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def to_text(self) -> str:
        return "\n".join(e.to_text() for e in self.events)

    @classmethod
    def from_text(cls, text: str) -> "EventScript":
        return cls(tuple(Event.from_text(l) for l in text.splitlines() if l.strip()))

    def is_balanced(self) -> bool:
        """Presses and releases match per key and per button, never releasing early."""
        held: Counter = Counter()
        for e in self.events:
            if e.kind in ("key-press", "button-press"):
                held[(e.kind[:3], e.args[0])] += 1
            elif e.kind in ("key-release", "button-release"):
                slot = (e.kind[:3], e.args[0])
                if held[slot] == 0:
                    return False
                held[slot] -= 1
        return not +held


def _press(key):
    return Event("key-press", (key,))


def _release(key):
    return Event("key-release", (key,))


def _move(obs: Observation, tag: int) -> Event:
    x, y = obs.tree.by_tag(tag).bbox.center
    return Event("pointer-move", (x, y))


def _click(button: str, n: int = 1) -> list[Event]:
    return [Event(k, (button,)) for _ in range(n) for k in ("button-press", "button-release")]


def _tap(keys) -> list[Event]:
    return [ev for k in keys for ev in (_press(k), _release(k))]


def _holding(keys, inner: list[Event]) -> list[Event]:
    return [_press(k) for k in keys] + inner + [_release(k) for k in reversed(keys)]


def compile_action(action: Action, obs: Observation) -> EventScript:
    """Compile a single action. Raises CompileError if it fails validation."""
    violations = validate_action(action, obs)
    if violations:
        raise CompileError(violations)

    ev: list[Event] = []
    if isinstance(action, Click):
        ev = [_move(obs, action.element_id)] + _holding(action.hold_keys, _click(action.button_type, action.num_clicks))
    elif isinstance(action, Type):
        if action.element_id is not None:
            ev += [_move(obs, action.element_id)] + _click("left")
        if action.overwrite:
            ev += _holding(SELECT_ALL[:1], _tap(SELECT_ALL[1:])) + _tap([DELETE_KEY])
        if action.text:
            ev.append(Event("text-emit", (action.text,)))
        if action.enter:
            ev += _tap([ENTER_KEY])
    elif isinstance(action, Scroll):
        if action.element_id is not None:
            ev.append(_move(obs, action.element_id))
        ev.append(Event("wheel", (action.clicks,)))
    elif isinstance(action, Hotkey):
        ev = _holding(action.keys, [])
    elif isinstance(action, HoldAndPress):
        ev = _holding(action.hold_keys, _tap(action.press_keys))
    elif isinstance(action, DragAndDrop):
        inner = [Event("button-press", ("left",)), _move(obs, action.drop_on_id), Event("button-release", ("left",))]
        ev = [_move(obs, action.drag_from_id)] + _holding(action.hold_keys, inner)
    elif isinstance(action, SaveToBuffer):
        ev = [Event("buffer-store", (action.text,))]
    elif isinstance(action, SwitchApplications):
        ev = [Event("app-activate", (action.app_code,))]
    elif isinstance(action, Wait):
        ev = [Event("sleep", (round(action.time * 1000),))]
    elif isinstance(action, (Done, Fail)):
        ev = []
    else:
        raise CompileError([f"unsupported action {type(action).__name__}"])
    return EventScript(tuple(ev))

"""A deterministic simulated desktop.

Applications are mutable trees whose nodes declare their own transitions
(see :mod:`deskagent.env.taskfile`). Event scripts are interpreted one event
at a time; events with no declared effect are harmless no-ops.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Protocol

from deskagent.aci.events import EventScript
from deskagent.aci.geometry import BoundingBox
from deskagent.aci.tree import Observation, OcrBlock, RawNode, augment_with_ocr, parse_tree_text, tag_tree
from deskagent.env.taskfile import EFFECT_OPS, TRANSITIONS, EnvTask
from deskagent.errors import EnvError, TaskLoadError

MODIFIERS = frozenset({"ctrl", "shift", "alt", "cmd", "win", "super", "meta", "command", "option"})
EDITABLE_ROLES = frozenset({"text-field", "entry", "terminal", "text", "document", "spin-button"})


@dataclass
class SimNode:
    key: str
    role: str
    name: str = ""
    bbox: BoundingBox = BoundingBox(0, 0, 0, 0)
    states: set = field(default_factory=set)
    value: str = ""
    hidden: bool = False
    editable: bool = False
    mode: str = "append"
    transitions: dict = field(default_factory=dict)
    children: list["SimNode"] = field(default_factory=list)


@dataclass
class SimApp:
    code: str
    roots: list[SimNode]
    ocr: list[OcrBlock] = field(default_factory=list)
    hotkeys: dict = field(default_factory=dict)
    focus: str | None = None  # key of this app's focused element

    def walk(self, visible_only=False):
        def rec(nodes):
            for n in nodes:
                if visible_only and n.hidden:
                    continue
                yield n
                yield from rec(n.children)

        yield from rec(self.roots)

    def find(self, key: str) -> SimNode | None:
        return next((n for n in self.walk() if n.key == key), None)

    def remove(self, key: str) -> bool:
        def rec(nodes):
            for i, n in enumerate(nodes):
                if n.key == key:
                    del nodes[i]
                    return True
                if rec(n.children):
                    return True
            return False

        return rec(self.roots)


@dataclass
class SimState:
    apps: dict[str, SimApp]
    focused_app: str
    buffer: str = ""
    clock_ms: int = 0
    pointer: tuple[int, int] = (0, 0)
    held_keys: list = field(default_factory=list)
    pressed_on: dict = field(default_factory=dict)  # button -> key of node under pointer at press
    selected: bool = False

    @property
    def focus(self) -> str | None:
        return self.apps[self.focused_app].focus

    @focus.setter
    def focus(self, key: str | None):
        self.apps[self.focused_app].focus = key


def normalize_combo(combo: str) -> str:
    keys = [k.strip().lower() for k in combo.split("+") if k.strip()]
    mods = sorted(k for k in keys if k in MODIFIERS)
    rest = [k for k in keys if k not in MODIFIERS]
    return "+".join(mods + rest)


def _box(value, where) -> BoundingBox:
    try:
        return BoundingBox(*(int(v) for v in value))
    except (TypeError, ValueError) as exc:
        raise TaskLoadError(f"{where}: bad bbox {value!r}") from exc


def _check_effects(effects, where):
    if not isinstance(effects, list):
        raise TaskLoadError(f"{where}: transitions must be lists of effects")
    for eff in effects:
        if not isinstance(eff, dict) or eff.get("op") not in EFFECT_OPS:
            raise TaskLoadError(f"{where}: unknown effect {eff!r}")
    return [dict(e) for e in effects]


def _build_node(d, counter, where) -> SimNode:
    if not isinstance(d, dict) or "role" not in d:
        raise TaskLoadError(f"{where}: node must be an object with a role")
    key = str(d.get("key") or f"_n{counter[0]}")
    counter[0] += 1
    mode = d.get("mode", "append")
    if mode not in ("append", "overwrite"):
        raise TaskLoadError(f"{where}/{key}: mode must be append or overwrite")
    node = SimNode(
        key=key,
        role=str(d["role"]),
        name=str(d.get("name", "")),
        bbox=_box(d.get("bbox", (0, 0, 0, 0)), f"{where}/{key}"),
        states=set(d.get("states", ())),
        value=str(d.get("value", "")),
        hidden=bool(d.get("hidden", False)),
        editable=bool(d.get("editable", d["role"] in EDITABLE_ROLES)),
        mode=mode,
        transitions={t: _check_effects(d[t], f"{where}/{key}.{t}") for t in TRANSITIONS if t in d},
    )
    node.children = [_build_node(c, counter, f"{where}/{key}") for c in d.get("children", ())]
    return node


def _from_raw(raw: RawNode, counter) -> SimNode:
    node = SimNode(f"_n{counter[0]}", raw.role, raw.name, raw.bbox, set(raw.states), raw.value, editable=raw.role in EDITABLE_ROLES)
    counter[0] += 1
    node.children = [_from_raw(c, counter) for c in raw.children]
    return node


def build_state(initial: dict) -> SimState:
    """Validate an initial-state description and build a fresh SimState."""
    apps_doc = initial.get("apps")
    if not isinstance(apps_doc, dict) or not apps_doc:
        raise TaskLoadError("initial state needs a non-empty 'apps' object")
    apps = {}
    for code, spec in apps_doc.items():
        if not isinstance(spec, dict):
            raise TaskLoadError(f"app {code!r} must be an object")
        counter = [0]
        try:
            if "tree_text" in spec:
                roots = [_from_raw(r, counter) for r in parse_tree_text(spec["tree_text"])]
            else:
                roots = [_build_node(n, counter, code) for n in spec.get("tree", [])]
            ocr = [OcrBlock(str(b["text"]), _box(b["bbox"], f"{code}/ocr")) for b in spec.get("ocr", [])]
        except (KeyError, ValueError) as exc:
            raise TaskLoadError(f"app {code!r}: {exc}") from exc
        hotkeys = {normalize_combo(k): _check_effects(v, f"{code}.hotkeys[{k}]") for k, v in spec.get("hotkeys", {}).items()}
        app = SimApp(code, roots, ocr, hotkeys, spec.get("focus"))
        keys = [n.key for n in app.walk()]
        if len(keys) != len(set(keys)):
            raise TaskLoadError(f"app {code!r}: duplicate element keys")
        if app.focus is not None and app.focus not in keys:
            raise TaskLoadError(f"app {code!r}: focus names unknown element {app.focus!r}")
        apps[code] = app

    focused = initial.get("focused_app", next(iter(apps)))
    if focused not in apps:
        raise TaskLoadError(f"focused_app {focused!r} is not one of the apps")
    state = SimState(apps, focused)
    # every effect must name a real element or app
    for app in apps.values():
        effect_lists = [e for n in app.walk() for e in n.transitions.values()] + list(app.hotkeys.values())
        for effects in effect_lists:
            for eff in effects:
                target_app = eff.get("app", app.code)
                if target_app not in apps:
                    raise TaskLoadError(f"effect {eff!r} names unknown app {target_app!r}")
                if eff["op"] != "switch_app" and apps[target_app].find(str(eff.get("key"))) is None:
                    raise TaskLoadError(f"effect {eff!r} names unknown element")
    return state


class Environment(Protocol):
    def reset(self, task: EnvTask) -> Observation: ...
    def observe(self) -> Observation: ...
    def step(self, script: EventScript) -> "StepResult": ...
    def evaluate(self) -> bool: ...


@dataclass(frozen=True)
class StepResult:
    applied: bool
    observation: Observation


class SimDesktop:
    """In-memory desktop implementing reset/observe/step/evaluate."""

    def __init__(self, iou_threshold: float = 0.5):
        self.iou_threshold = iou_threshold
        self.task: EnvTask | None = None
        self.state: SimState | None = None
        self.tag_map: dict[int, SimNode] = {}
        self.steps_applied = 0

    # -- lifecycle -----------------------------------------------------------

    def reset(self, task: EnvTask) -> Observation:
        self.task = task
        self.state = build_state(copy.deepcopy(task.initial_state))
        self.steps_applied = 0
        return self.observe()

    def observe(self) -> Observation:
        st = self._require()
        app = st.apps[st.focused_app]
        self.tag_map = {}
        ordered: list[SimNode] = []

        def to_raw(n: SimNode) -> RawNode:
            ordered.append(n)
            states = set(n.states)
            if n.key == st.focus:
                states.add("focused")
            return RawNode(n.role, n.name, n.bbox, frozenset(states), n.value,
                           [to_raw(c) for c in n.children if not c.hidden])

        roots = [to_raw(r) for r in app.roots if not r.hidden]
        tree = tag_tree(roots)
        self.tag_map = {i: node for i, node in enumerate(ordered)}
        tree = augment_with_ocr(tree, app.ocr, self.iou_threshold)
        return Observation.from_tree(tree, None, st.focused_app, tuple(st.apps))

    def _require(self) -> SimState:
        if self.state is None:
            raise EnvError("environment not reset")
        return self.state

    # -- events --------------------------------------------------------------

    def step(self, script: EventScript) -> StepResult:
        st = self._require()
        if not script.is_balanced():
            raise EnvError("unbalanced event script")
        for ev in script:
            handler = getattr(self, "_on_" + ev.kind.replace("-", "_"))
            handler(st, *ev.args)
        self.steps_applied += 1
        return StepResult(True, self.observe())

    def _hit(self, st: SimState) -> SimNode | None:
        hit = None
        for n in st.apps[st.focused_app].walk(visible_only=True):
            if n.bbox.contains(*st.pointer):
                hit = n
        return hit

    def _focused_node(self, st) -> SimNode | None:
        return st.apps[st.focused_app].find(st.focus) if st.focus else None

    def _on_pointer_move(self, st, x, y):
        st.pointer = (x, y)

    def _on_button_press(self, st, button):
        node = self._hit(st)
        st.pressed_on[button] = node.key if node else None

    def _on_button_release(self, st, button):
        pressed = st.pressed_on.pop(button, None)
        node = self._hit(st)
        if node is None:
            return
        app = st.focused_app
        if pressed is not None and pressed != node.key:
            self._apply(st, node.transitions.get("on_drop", []), app)
            return
        if button == "left":
            if st.focus != node.key:
                st.selected = False
            st.focus = node.key
            self._apply(st, node.transitions.get("on_click", []), app)
        elif button == "right":
            self._apply(st, node.transitions.get("on_right_click", []), app)

    def _on_key_press(self, st, key):
        key = key.lower()
        st.held_keys.append(key)
        if key in MODIFIERS:
            return
        combo = normalize_combo("+".join(st.held_keys))
        node = self._focused_node(st)
        if node is not None and node.editable:
            if combo == "ctrl+a":
                st.selected = True
            elif key in ("backspace", "delete"):
                node.value = "" if st.selected else node.value[:-1]
                st.selected = False
        if key in ("enter", "return") and node is not None:
            self._apply(st, node.transitions.get("on_enter", []), st.focused_app)
        app = st.apps[st.focused_app]
        if combo in app.hotkeys:
            self._apply(st, app.hotkeys[combo], st.focused_app)

    def _on_key_release(self, st, key):
        key = key.lower()
        if key in st.held_keys:
            st.held_keys.remove(key)

    def _on_text_emit(self, st, text):
        node = self._focused_node(st)
        if node is None or not node.editable:
            return
        if node.mode == "overwrite" or st.selected:
            node.value = text
        else:
            node.value += text
        st.selected = False
        self._apply(st, node.transitions.get("on_type", []), st.focused_app)

    def _on_wheel(self, st, clicks):
        pass

    def _on_app_activate(self, st, code):
        if code in st.apps and code != st.focused_app:
            st.focused_app = code
            st.selected = False

    def _on_sleep(self, st, ms):
        st.clock_ms += ms

    def _on_buffer_store(self, st, text):
        st.buffer = text

    def _apply(self, st: SimState, effects, app_code: str):
        for eff in effects:
            op = eff["op"]
            app = st.apps[eff.get("app", app_code)]
            if op == "switch_app":
                self._on_app_activate(st, eff["app"])
                continue
            node = app.find(str(eff["key"]))
            if node is None:
                continue  # removed earlier in this run
            if op == "show":
                node.hidden = False
            elif op == "hide":
                node.hidden = True
            elif op == "remove":
                app.remove(node.key)
                if app.focus is not None and app.find(app.focus) is None:
                    app.focus = None
            elif op == "set_state":
                node.states.add(eff["state"])
            elif op == "clear_state":
                node.states.discard(eff["state"])
            elif op == "toggle_state":
                node.states ^= {eff["state"]}
            elif op == "set_value":
                node.value = str(eff.get("value", ""))
            elif op == "set_name":
                node.name = str(eff.get("name", ""))
            elif op == "focus":
                app.focus = node.key

    # -- evaluation ----------------------------------------------------------

    def _matching(self, st: SimState, rule: dict) -> list[SimNode]:
        codes = [rule["app"]] if "app" in rule else list(st.apps)
        found = []
        for code in codes:
            app = st.apps.get(code)
            if app is None:
                continue
            for n in app.walk(visible_only=True):
                if "key" in rule and n.key != rule["key"]:
                    continue
                if "role" in rule and n.role != rule["role"]:
                    continue
                if "name" in rule and n.name != rule["name"]:
                    continue
                found.append(n)
        return found

    def check_rule(self, rule: dict) -> bool:
        st = self._require()
        kind = rule["rule"]
        if kind == "buffer-equals":
            return st.buffer == rule.get("value", "")
        nodes = self._matching(st, rule)
        if kind == "element-exists":
            return bool(nodes)
        if kind == "element-absent":
            return not nodes
        attr, expected = rule.get("attribute", "value"), rule.get("equals")
        for n in nodes:
            if attr.startswith("state:"):
                actual = attr[6:] in n.states
            else:
                actual = getattr(n, attr, None)
            if actual == expected:
                return True
        return False

    def evaluate(self) -> bool:
        """True when every evaluator rule of the current task holds."""
        if self.task is None:
            raise EnvError("environment not reset")
        return all(self.check_rule(r) for r in self.task.evaluator)


class RealDesktopAdapter:
    """Seam for driving a real OS through the same interface. Not shipped."""

    def _unsupported(self, *args):
        raise NotImplementedError("real desktop control is not implemented; use SimDesktop")

    reset = observe = step = evaluate = _unsupported

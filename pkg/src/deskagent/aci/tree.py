"""Accessibility trees: parsing, integer tagging, OCR augmentation, rendering.

Text serialization, one node per line::

    window "Mozilla Thunderbird" 0 0 1280 800
      menu-item "Account Settings" 10 40 120 24 focused
      text-field "Minutes" 200 300 80 20 value="3"

Two spaces of indent per depth level, then role, JSON-quoted name, x y w h,
then optional state flags. A trailing ``value="..."`` token sets the element
value. Blank lines and lines starting with ``#`` are skipped.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from deskagent.aci.geometry import BoundingBox, compute_iou
from deskagent.errors import ParseError

INDENT = "  "
OCR_ROLE = "ocr-text"

_LINE_RE = re.compile(
    r'^(?P<indent> *)(?P<role>\S+) (?P<name>"(?:[^"\\]|\\.)*")'
    r" (?P<x>-?\d+) (?P<y>-?\d+) (?P<w>\d+) (?P<h>\d+)"
    r'(?P<states>(?: (?!value=)[^\s"]+)*)(?: value=(?P<value>"(?:[^"\\]|\\.)*"))?\s*$'
)


@dataclass
class RawNode:
    """Untagged tree node as produced by a platform feed or a task file."""

    role: str
    name: str = ""
    bbox: BoundingBox = field(default_factory=lambda: BoundingBox(0, 0, 0, 0))
    states: frozenset[str] = frozenset()
    value: str = ""
    children: list["RawNode"] = field(default_factory=list)


@dataclass(frozen=True)
class UiElement:
    tag: int
    role: str
    name: str
    bbox: BoundingBox
    states: frozenset[str] = frozenset()
    source: str = "tree"
    value: str = ""


@dataclass(frozen=True)
class OcrBlock:
    text: str
    bbox: BoundingBox

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("OCR block text is empty")


@dataclass(frozen=True)
class AccessibilityTree:
    nodes: tuple[UiElement, ...] = ()
    parent: Mapping[int, int] = field(default_factory=dict)

    def __post_init__(self):
        tags = [n.tag for n in self.nodes]
        if len(set(tags)) != len(tags):
            raise ValueError("duplicate tags in tree")
        known = set(tags)
        for child, par in self.parent.items():
            if child not in known or par not in known:
                raise ValueError(f"parent map references unknown tag {child}->{par}")

    @property
    def tags(self) -> frozenset[int]:
        return frozenset(n.tag for n in self.nodes)

    def by_tag(self, tag: int) -> UiElement | None:
        for node in self.nodes:
            if node.tag == tag:
                return node
        return None

    def __len__(self):
        return len(self.nodes)


@dataclass(frozen=True)
class Observation:
    """What the agent sees at one time step.

    ``apps`` lists switchable application codes and may be empty when the
    environment does not expose them.
    """

    tree: AccessibilityTree
    linearized: str
    screenshot: str | None = None
    focused_app: str = ""
    apps: tuple[str, ...] = ()

    @classmethod
    def from_tree(cls, tree: AccessibilityTree, screenshot=None, focused_app="", apps=()):
        return cls(tree, linearize(tree), screenshot, focused_app, tuple(apps))

    @property
    def valid_element_ids(self) -> frozenset[int]:
        return self.tree.tags

    def render(self) -> str:
        head = []
        if self.focused_app:
            head.append(f"Focused application: {self.focused_app}")
        if self.apps:
            head.append("Open applications: " + ", ".join(self.apps))
        return "\n".join(head + [self.linearized])


# -- parsing -----------------------------------------------------------------


def parse_tree_text(text: str) -> list[RawNode]:
    roots: list[RawNode] = []
    stack: list[RawNode] = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        m = _LINE_RE.match(line)
        if m is None:
            raise ParseError(f"line {lineno}: cannot parse {line!r}")
        indent = len(m["indent"])
        if indent % len(INDENT):
            raise ParseError(f"line {lineno}: indent must be a multiple of {len(INDENT)}")
        depth = indent // len(INDENT)
        if depth > len(stack):
            raise ParseError(f"line {lineno}: indent jumps more than one level")
        try:
            name = json.loads(m["name"])
            value = json.loads(m["value"]) if m["value"] else ""
        except json.JSONDecodeError as exc:
            raise ParseError(f"line {lineno}: bad string literal") from exc
        node = RawNode(
            role=m["role"],
            name=name,
            bbox=BoundingBox(int(m["x"]), int(m["y"]), int(m["w"]), int(m["h"])),
            states=frozenset(m["states"].split()),
            value=value,
        )
        del stack[depth:]
        if stack:
            stack[-1].children.append(node)
        else:
            roots.append(node)
        stack.append(node)
    return roots


def dump_tree_text(roots: Iterable[RawNode]) -> str:
    lines: list[str] = []

    def walk(node: RawNode, depth: int):
        b = node.bbox
        parts = [INDENT * depth + node.role, _quote(node.name), str(b.x), str(b.y), str(b.w), str(b.h)]
        parts.extend(sorted(node.states))
        if node.value:
            parts.append("value=" + _quote(node.value))
        lines.append(" ".join(parts))
        for child in node.children:
            walk(child, depth + 1)

    for root in roots:
        walk(root, 0)
    return "\n".join(lines)


def raw_from_dict(d: Mapping) -> RawNode:
    """Build a RawNode from the nested-mapping form used in task files."""
    if not isinstance(d, Mapping) or "role" not in d:
        raise ParseError(f"node must be a mapping with a role: {d!r}")
    bbox = d.get("bbox", (0, 0, 0, 0))
    try:
        box = BoundingBox(*(int(v) for v in bbox))
    except (TypeError, ValueError) as exc:
        raise ParseError(f"bad bbox {bbox!r}") from exc
    return RawNode(
        role=str(d["role"]),
        name=str(d.get("name", "")),
        bbox=box,
        states=frozenset(d.get("states", ())),
        value=str(d.get("value", "")),
        children=[raw_from_dict(c) for c in d.get("children", ())],
    )


def _quote(s: str) -> str:
    return json.dumps(s, ensure_ascii=False)


# -- tagging and augmentation -----------------------------------------------


def tag_tree(raw) -> AccessibilityTree:
    """Assign integer tags 0..n-1 in pre-order.

    ``raw`` may be tree text, a RawNode, a nested mapping, or a sequence of
    any of those node forms (a forest).
    """
    if isinstance(raw, str):
        roots = parse_tree_text(raw)
    elif isinstance(raw, (RawNode, Mapping)):
        roots = [raw]
    elif isinstance(raw, Sequence):
        roots = list(raw)
    else:
        raise ParseError(f"cannot tag object of type {type(raw).__name__}")

    nodes: list[UiElement] = []
    parent: dict[int, int] = {}

    def walk(node, parent_tag):
        if isinstance(node, Mapping):
            node = raw_from_dict(node)
        if not isinstance(node, RawNode):
            raise ParseError(f"not a tree node: {node!r}")
        tag = len(nodes)
        nodes.append(UiElement(tag, node.role, node.name, node.bbox, frozenset(node.states), "tree", node.value))
        if parent_tag is not None:
            parent[tag] = parent_tag
        for child in node.children:
            walk(child, tag)

    for root in roots:
        walk(root, None)
    return AccessibilityTree(tuple(nodes), parent)


def max_iou(box: BoundingBox, elements: Iterable[UiElement]) -> float:
    return max((compute_iou(box, e.bbox) for e in elements), default=0.0)


def augment_with_ocr(
    tree: AccessibilityTree, blocks: Iterable[OcrBlock], iou_threshold: float = 0.5
) -> AccessibilityTree:
    """Append OCR blocks that do not overlap an existing element.

    A block is appended when its best IOU against the original tree elements
    is <= ``iou_threshold``. Appended nodes are parentless and take the next
    unused tags in block order.
    """
    existing = tree.nodes
    next_tag = max((n.tag for n in existing), default=-1) + 1
    added: list[UiElement] = []
    for block in blocks:
        if max_iou(block.bbox, existing) <= iou_threshold:
            added.append(UiElement(next_tag, OCR_ROLE, block.text.strip(), block.bbox, frozenset(), "ocr"))
            next_tag += 1
    if not added:
        return tree
    return AccessibilityTree(existing + tuple(added), dict(tree.parent))


# -- rendering ---------------------------------------------------------------


def element_line(e: UiElement) -> str:
    b = e.bbox
    line = f"[{e.tag}] {e.role} {_quote(e.name)} ({b.x},{b.y},{b.w},{b.h})"
    if e.states:
        line += " " + " ".join(sorted(e.states))
    if e.value:
        line += " value=" + _quote(e.value)
    return line


def linearize(tree: AccessibilityTree) -> str:
    return "\n".join(element_line(e) for e in tree.nodes)

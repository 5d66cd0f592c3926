"""Agent-computer interface: tagged observations in, event scripts out."""
from deskagent.aci.actions import (
    Action,
    ActionSyntaxError,
    Click,
    Done,
    DragAndDrop,
    Fail,
    HoldAndPress,
    Hotkey,
    PRIMITIVES,
    SaveToBuffer,
    Scroll,
    SwitchApplications,
    Type,
    Wait,
    parse_action,
    validate_action,
)
from deskagent.aci.events import Event, EventScript, compile_action
from deskagent.aci.geometry import BoundingBox, compute_iou
from deskagent.aci.tree import (
    AccessibilityTree,
    Observation,
    OcrBlock,
    RawNode,
    UiElement,
    augment_with_ocr,
    dump_tree_text,
    linearize,
    parse_tree_text,
    tag_tree,
)

__all__ = [
    "AccessibilityTree", "Action", "ActionSyntaxError", "BoundingBox", "Click", "Done", "DragAndDrop",
    "Event", "EventScript", "Fail", "HoldAndPress", "Hotkey", "Observation", "OcrBlock", "PRIMITIVES",
    "RawNode", "SaveToBuffer", "Scroll", "SwitchApplications", "Type", "UiElement", "Wait",
    "augment_with_ocr", "compile_action", "compute_iou", "dump_tree_text", "linearize",
    "parse_action", "parse_tree_text", "tag_tree", "validate_action",
]

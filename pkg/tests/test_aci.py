import math

import pytest
from hypothesis import given, settings, strategies as st

from deskagent.aci import (
    BoundingBox,
    Click,

    DragAndDrop,
    EventScript,
    HoldAndPress,
    Hotkey,
    Observation,
    OcrBlock,

    SaveToBuffer,
    Scroll,
    SwitchApplications,
    Type,
    Wait,
    augment_with_ocr,
    compile_action,
    compute_iou,
    dump_tree_text,
    linearize,
    parse_action,
    parse_tree_text,
    tag_tree,
    validate_action,
)
from deskagent.aci.actions import ActionSyntaxError, Done, Fail
from deskagent.errors import CompileError, ParseError

from conftest import grid_observation
from oracles import pixel_iou

boxes = st.builds(
    lambda x, y, w, h: (x, y, w, h),
    st.integers(0, 30), st.integers(0, 30), st.integers(0, 12), st.integers(0, 12),
)


# -- geometry ---------------------------------------------------------------


def test_iou_examples():
    assert compute_iou(BoundingBox(0, 0, 10, 10), BoundingBox(0, 0, 10, 10)) == 1.0
    assert compute_iou(BoundingBox(0, 0, 10, 10), BoundingBox(20, 20, 5, 5)) == 0.0
    a, b = (0, 0, 10, 10), (5, 0, 10, 10)
    assert pixel_iou(a, b) == pytest.approx(1 / 3)
    assert compute_iou(BoundingBox(*a), BoundingBox(*b)) == pytest.approx(pixel_iou(a, b), abs=1e-12)


def test_negative_size_rejected():
    with pytest.raises(ValueError):
        BoundingBox(0, 0, -1, 3)


def test_zero_area_boxes():
    assert compute_iou(BoundingBox(3, 3, 0, 0), BoundingBox(3, 3, 0, 0)) == 0.0


@given(boxes, boxes)
def test_iou_matches_pixels(a, b):
    got = compute_iou(BoundingBox(*a), BoundingBox(*b))
    assert abs(got - pixel_iou(a, b)) <= 1e-12
    assert 0.0 <= got <= 1.0
    assert got == compute_iou(BoundingBox(*b), BoundingBox(*a))


def test_center_uses_floor_division():
    assert BoundingBox(0, 0, 5, 3).center == (2, 1)


# -- tagging ----------------------------------------------------------------


TREE_TEXT = '''
window "Mozilla Thunderbird" 0 0 800 600
  menu-item "Account Settings" 10 4 130 22
  tree "Folders" 0 30 200 500
    tree-item "Inbox" 10 40 180 20 selected
  text-field "Search" 300 4 200 22 focused value="abc"
'''


def test_tag_tree_preorder():
    tree = tag_tree(TREE_TEXT)
    assert [n.tag for n in tree.nodes] == [0, 1, 2, 3, 4]
    assert [n.name for n in tree.nodes] == ["Mozilla Thunderbird", "Account Settings", "Folders", "Inbox", "Search"]
    assert tree.parent == {1: 0, 2: 0, 3: 2, 4: 0}
    assert tree.by_tag(3).states == frozenset({"selected"})
    assert tree.by_tag(4).value == "abc"


def test_tag_three_nodes_and_empty():
    tree = tag_tree({"role": "window", "children": [{"role": "button"}, {"role": "label"}]})
    assert tree.tags == {0, 1, 2}
    assert len(tag_tree([])) == 0
    assert tag_tree(TREE_TEXT) == tag_tree(TREE_TEXT)


def test_tree_text_round_trip():
    roots = parse_tree_text(TREE_TEXT)
    assert parse_tree_text(dump_tree_text(roots)) == roots


@pytest.mark.parametrize("bad", ['  button "x" 0 0 1 1', 'button x 0 0 1 1', 'window "a" 0 0 1 1\n   button "b" 0 0 1 1'])
def test_tree_text_errors(bad):
    with pytest.raises(ParseError):
        parse_tree_text(bad)


# -- OCR augmentation ---------------------------------------------------------


def test_ocr_overlap_and_disjoint():
    tree = tag_tree({"role": "window", "bbox": [0, 0, 100, 100], "children": [{"role": "button", "name": "OK", "bbox": [10, 10, 20, 10]}]})
    exact = OcrBlock("OK", BoundingBox(10, 10, 20, 10))
    far = OcrBlock("Inbox", BoundingBox(200, 200, 30, 10))
    out = augment_with_ocr(tree, [exact, far])
    assert len(out) == 3
    added = out.by_tag(2)
    assert (added.name, added.source, added.role) == ("Inbox", "ocr", "ocr-text")
    assert out.nodes[:2] == tree.nodes


def test_ocr_threshold_is_inclusive():
    tree = tag_tree({"role": "button", "bbox": [0, 0, 10, 10]})
    half = OcrBlock("x", BoundingBox(5, 0, 10, 10))  # IOU 1/3
    assert len(augment_with_ocr(tree, [half], iou_threshold=1 / 3)) == 2
    assert len(augment_with_ocr(tree, [half], iou_threshold=0.3)) == 1


def test_ocr_blocks_do_not_dedupe_against_each_other():
    tree = tag_tree({"role": "window", "bbox": [0, 0, 10, 10]})
    blocks = [OcrBlock("a", BoundingBox(50, 50, 10, 10)), OcrBlock("a", BoundingBox(50, 50, 10, 10))]
    assert len(augment_with_ocr(tree, blocks)) == 3


def test_empty_ocr_text_rejected():
    with pytest.raises(ValueError):
        OcrBlock("  ", BoundingBox(0, 0, 1, 1))


# -- linearization ----------------------------------------------------------------


def test_linearize_lines():
    assert linearize(tag_tree([])) == ""
    text = linearize(tag_tree({"role": "button", "name": "OK", "bbox": [1, 2, 3, 4]}))
    assert text == '[0] button "OK" (1,2,3,4)'
    tree = tag_tree(TREE_TEXT)
    lines = linearize(tree).splitlines()
    assert lines[3] == '[3] tree-item "Inbox" (10,40,180,20) selected'
    assert lines[4].endswith('focused value="abc"')


@given(st.integers(1, 60))
def test_linearize_mentions_every_tag_once(n):
    obs = grid_observation(n)
    text = obs.linearized
    for tag in range(n):
        assert sum(1 for l in text.splitlines() if l.startswith(f"[{tag}] ")) == 1


def test_render_includes_apps():
    obs = grid_observation(3)
    assert obs.render().splitlines()[:2] == ["Focused application: files", "Open applications: files, terminal"]


# -- parsing and validation -------------------------------------------------------


def test_parse_reference_literals():
    assert parse_action('agent.click(41, 1, "left")') == Click(41, 1, "left")
    assert parse_action('agent.click(86, 1, "left")') == Click(86, 1, "left")
    assert parse_action("agent.click(38, 1, left)") == Click(38, 1, "left")
    assert parse_action("agent.hotkey(['ctrl', 'h'])") == Hotkey(("ctrl", "h"))
    assert parse_action("agent.type(text='cd /home/user', enter=True)") == Type("cd /home/user", enter=True)
    assert parse_action("agent.type(230, \"3\", overwrite=True)") == Type("3", 230, overwrite=True)
    assert parse_action('agent.type("text", 181)') == Type("text", 181)
    assert parse_action("agent.drag_and_drop(55, 57)") == DragAndDrop(55, 57)
    assert parse_action("agent.hold_and_press(['shift'], [])") == HoldAndPress(("shift",), ())
    assert parse_action("agent.wait(1)") == Wait(1)
    assert parse_action('agent.done(28, 1, "left")') == Done()
    assert parse_action("agent.fail()") == Fail()


@pytest.mark.parametrize("bad", [
    "click(1)", "agent.teleport(1)", "agent.click(x=1)", "agent.click(1, 2, 'left', [], 5)",
    "agent.click('1')", "agent.wait('soon')", "agent.click(1, num_clicks=2, num_clicks=3)", "agent.click(f(1))",
])
def test_parse_errors(bad):
    with pytest.raises(ActionSyntaxError):
        parse_action(bad)


@pytest.mark.parametrize("literal", [
    'agent.click(41, 2, "right", ["shift"])', "agent.type(\"hi\", 3, True, True)", "agent.scroll(4, -3)",
    "agent.hotkey([\"ctrl\", \"h\"])", 'agent.save_to_buffer("x y")', 'agent.switch_applications("gimp")',
    "agent.wait(0.5)", "agent.drag_and_drop(55, 57, [\"ctrl\"])", "agent.done()", "agent.fail()",
])
def test_literal_round_trip(literal):
    action = parse_action(literal)
    assert parse_action(action.to_literal()) == action


def test_validation(grid_obs):
    assert validate_action(Click(41, 1, "left"), grid_obs) == []
    small = grid_observation(3)
    assert "unknown element_id 999" in validate_action(Click(999), small)[0]
    assert validate_action(Wait(0), small)
    assert validate_action(Wait(math.nan), small)
    assert validate_action(Click(1, 0), small)
    assert validate_action(Click(1, 1, "sideways"), small)
    assert validate_action(Hotkey(()), small)
    assert validate_action(Scroll(1, 0), small)
    assert validate_action(SwitchApplications("gimp"), small)
    assert validate_action(SwitchApplications("terminal"), small) == []
    assert validate_action(DragAndDrop(1, 7), small)


# -- compilation ------------------------------------------------------------------


def test_compile_hotkey_order(grid_obs):
    script = compile_action(Hotkey(("ctrl", "h")), grid_obs)
    assert script.to_text().splitlines() == ["key-press ctrl", "key-press h", "key-release h", "key-release ctrl"]


def test_compile_type_enter_without_element(grid_obs):
    script = compile_action(Type("cd /home/user", enter=True), grid_obs)
    assert script.to_text().splitlines() == ['text-emit "cd /home/user"', "key-press enter", "key-release enter"]


def test_compile_drag_centers(grid_obs):
    # tag 55 -> (500,150,90,20), tag 57 -> (700,150,90,20)
    script = compile_action(DragAndDrop(55, 57), grid_obs)
    assert script.to_text().splitlines() == [
        "pointer-move 545 160", "button-press left", "pointer-move 745 160", "button-release left"]


def test_compile_rejects_invalid(grid_obs):
    with pytest.raises(CompileError) as err:
        compile_action(Click(9999), grid_obs)
    assert err.value.violations


def test_event_script_text_round_trip(grid_obs):
    for action in [Click(3, 2, "left", ("shift",)), Type('say "hi"', 4, True, True), Scroll(None, 5),
                   SaveToBuffer("ünï"), SwitchApplications("terminal"), Wait(0.25)]:
        script = compile_action(action, grid_obs)
        assert EventScript.from_text(script.to_text()) == script


def test_unbalanced_detection():
    assert not EventScript.from_text("key-release a").is_balanced()
    assert not EventScript.from_text("key-press a").is_balanced()
    assert EventScript.from_text("key-press a\nkey-release a").is_balanced()


actions = st.one_of(
    st.builds(Click, st.integers(0, 9), st.integers(1, 3), st.sampled_from(["left", "right", "middle"]),
              st.lists(st.sampled_from(["ctrl", "shift", "alt"]), max_size=2).map(tuple)),
    st.builds(Type, st.text(max_size=8), st.none() | st.integers(0, 9), st.booleans(), st.booleans()),
    st.builds(Hotkey, st.lists(st.sampled_from(["ctrl", "h", "a", "f4"]), min_size=1, max_size=3).map(tuple)),
    st.builds(HoldAndPress, st.lists(st.sampled_from(["ctrl", "shift"]), min_size=1, max_size=2).map(tuple),
              st.lists(st.sampled_from(["a", "b", "tab"]), max_size=3).map(tuple)),
    st.builds(DragAndDrop, st.integers(0, 9), st.integers(0, 9),
              st.lists(st.sampled_from(["ctrl", "shift"]), max_size=2).map(tuple)),
)


@settings(max_examples=200)
@given(actions)
def test_compiled_scripts_balanced(action):
    obs = grid_observation(10)
    script = compile_action(action, obs)
    assert script.is_balanced()
    assert EventScript.from_text(script.to_text()) == script

import httpx
import pytest
from hypothesis import given, strategies as st

from deskagent import prompts
from deskagent.config import RetrievalToggles
from deskagent.errors import ModelError, PlanParseError
from deskagent.llm import ModelClient
from deskagent.memory import HashEmbedder, MemoryStore
from deskagent.planner import Manager, parse_plan, render_plan
from deskagent.search import DisabledSearch, HttpSearch, StubSearch
from deskagent.trace import Tracer
from deskagent.types import FusedKnowledge, Query, Subtask, TaskSpec, WebKnowledge

from conftest import scripted, thunderbird_env

TASK = TaskSpec('Help me to remove the account "anonym-x2024@outlook.com"', "t")
QUERY = "How to remove an email account in Thunderbird"


def manager(*rules, search=None, store=None, toggles=None):
    tracer = Tracer("t")
    backend = scripted(*rules)
    m = Manager(ModelClient(backend, tracer), search or DisabledSearch(), store, tracer, toggles)
    return m, tracer, backend


# -- plan grammar -------------------------------------------------------------


def test_parse_three_items():
    plan = parse_plan("1. TITLE: A CONTEXT: x\n2. TITLE: B CONTEXT: y\n3) TITLE: C CONTEXT: z")
    assert [(s.title, s.context, s.index) for s in plan] == [("A", "x", 0), ("B", "y", 1), ("C", "z", 2)]


def test_continuation_lines_and_fences():
    plan = parse_plan("Here is the plan:\n```\n1. TITLE: A CONTEXT: first\n   more detail\n2. TITLE: B CONTEXT:\n```")
    assert plan[0].context == "first\n   more detail"
    assert plan[1].context == ""


@pytest.mark.parametrize("bad", ["", "no items here", "1. TITLE: A", "1. TITLE: A CONTEXT: x\n3. TITLE: B CONTEXT: y", "1. TITLE: CONTEXT: x"])
def test_parse_errors(bad):
    with pytest.raises(PlanParseError):
        parse_plan(bad)


titles = st.text(alphabet=st.characters(whitelist_categories=("L", "N"), whitelist_characters=" -/"), min_size=1, max_size=20).map(str.strip).filter(bool)
contexts = st.text(alphabet=st.characters(whitelist_categories=("L", "N"), whitelist_characters=" .,"), max_size=40).map(str.strip)


@given(st.lists(st.tuples(titles, contexts), min_size=1, max_size=6))
def test_render_parse_round_trip(items):
    subtasks = [Subtask(t, c, i) for i, (t, c) in enumerate(items)]
    assert list(parse_plan(render_plan(subtasks))) == subtasks


# -- manager --------------------------------------------------------------------


def test_query_passthrough_and_prompt():
    _, obs = thunderbird_env()
    m, tracer, _ = manager((prompts.QUERY, QUERY))
    assert m.formulate_query(TASK, obs) == Query(QUERY)
    prompt = tracer.events  # model-call recorded
    assert prompt[0]["payload"]["purpose"] == "query"
    msgs = prompts.query_prompt(TASK.instruction, obs)
    text = "\n".join(x.text for x in msgs)
    assert TASK.instruction in text and '[2] menu-item "Account Settings"' in text


def test_empty_query_reply_is_model_error():
    _, obs = thunderbird_env()
    m, _, _ = manager((prompts.QUERY, '""'))
    with pytest.raises(ModelError):
        m.formulate_query(TASK, obs)


def test_web_retrieval_modes():
    m, tracer, _ = manager(search=StubSearch(answers={QUERY: "canned"}))
    assert m.retrieve_web(Query(QUERY)).text == "canned"
    m, _, _ = manager(search=DisabledSearch())
    assert m.retrieve_web(Query(QUERY)).text == ""

    def down(request):
        raise httpx.ConnectError("down", request=request)
    broken = HttpSearch("http://search.local", client=httpx.Client(transport=httpx.MockTransport(down)))
    m, tracer, _ = manager(search=broken)
    assert m.retrieve_web(Query(QUERY)).text == ""
    assert tracer.of_kind("warning", source="web")


def test_stub_search_directory(tmp_path):
    (tmp_path / "default.txt").write_text("fallback\n")
    from deskagent.llm import fingerprint
    (tmp_path / f"{fingerprint(QUERY)}.txt").write_text("specific")
    s = StubSearch(tmp_path)
    assert s.search(QUERY) == "specific"
    assert s.search("other") == "fallback"


def test_fuse_no_inputs_no_call():
    m, tracer, _ = manager()
    assert m.fuse([], WebKnowledge("")) == FusedKnowledge("")
    assert tracer.of_kind("model-call") == []


def test_fuse_prompt_contains_sources():
    msgs = prompts.fusion_prompt(QUERY, [("narrative summary text", "success")], "web answer text")
    text = "\n".join(x.text for x in msgs)
    assert "narrative summary text" in text and "web answer text" in text
    m, _, _ = manager((prompts.FUSION, "fused guideline"))
    assert m.fuse([("s", "success")], WebKnowledge("w"), Query(QUERY)).text == "fused guideline"


def test_plan_first_subtask_opens_account_settings():
    _, obs = thunderbird_env()
    plan_reply = "1. TITLE: Open Account Settings CONTEXT: menu\n2. TITLE: Remove the Account CONTEXT: confirm"
    m, tracer, _ = manager((prompts.QUERY, QUERY), (prompts.PLAN, plan_reply))
    query, plan = m.plan(TASK, obs)
    assert plan[0].title == "Open Account Settings"
    assert tracer.of_kind("plan")[0]["payload"]["subtasks"] == ["Open Account Settings", "Remove the Account"]


def test_plan_reask_then_error():
    _, obs = thunderbird_env()
    m, tracer, _ = manager((prompts.PLAN, "1. TITLE: A"), (prompts.CORRECTION, "1. TITLE: A CONTEXT: fixed"))
    assert m.plan_subtasks(TASK, obs, FusedKnowledge(""))[0].context == "fixed"
    assert len(tracer.of_kind("warning", source="plan")) == 1
    m, _, _ = manager((prompts.PLAN, "1. TITLE: A"), (prompts.CORRECTION, "still no context"))
    with pytest.raises(PlanParseError):
        m.plan_subtasks(TASK, obs, FusedKnowledge(""))


def test_narrative_toggle_and_call_budget():
    store = MemoryStore("narrative", HashEmbedder())
    store.save_narrative(QUERY, "remembered strategy", "success")
    _, obs = thunderbird_env()
    rules = [(prompts.QUERY, QUERY), (prompts.FUSION, "fused"), (prompts.PLAN, "1. TITLE: A CONTEXT: b")]
    m, tracer, _ = manager(*rules, store=store)
    m.plan(TASK, obs)
    assert [e["payload"]["purpose"] for e in tracer.of_kind("model-call")] == ["query", "fusion", "plan"]
    [hit] = tracer.of_kind("retrieval", source="narrative")
    assert hit["payload"]["hits"] == ["n000000"]
    fusion_prompt = prompts.fusion_prompt(QUERY, [("remembered strategy", "success")], "")
    assert "remembered strategy" in fusion_prompt[-1].text

    m, tracer, _ = manager(*rules, store=store, toggles=RetrievalToggles(web=False, narrative=False))
    store.read_count = 0
    m.plan(TASK, obs)
    assert store.read_count == 0
    assert tracer.of_kind("retrieval") == []
    assert [e["payload"]["purpose"] for e in tracer.of_kind("model-call")] == ["query", "plan"]


def test_replan_contains_failure_note_and_drops_completed():
    _, obs = thunderbird_env()
    reply = "1. TITLE: Done Already CONTEXT: x\n2. TITLE: Next CONTEXT: y"
    m, tracer, backend = manager((prompts.QUERY, QUERY), (prompts.PLAN, reply))
    query, plan = m.replan(TASK, obs, "step 0: agent.click(99) -> rejected", ["Done Already"])
    assert [(s.title, s.index) for s in plan] == [("Next", 0)]
    assert len(tracer.of_kind("replan")) == 1
    msgs = prompts.plan_prompt(TASK.instruction, obs, "", "step 0: agent.click(99) -> rejected", ["Done Already"])
    assert "step 0: agent.click(99) -> rejected" in msgs[-1].text

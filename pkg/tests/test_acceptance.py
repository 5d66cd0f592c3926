"""Acceptance criteria. Each test prints exactly one PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``; the lines are repeated
in an "acceptance criteria" section of the terminal summary.
"""
from __future__ import annotations

import random
import sys
import time
from contextlib import contextmanager

from deskagent.aci import (
    BoundingBox,
    EventScript,
    OcrBlock,
    augment_with_ocr,
    compile_action,
    compute_iou,
    parse_action,
    tag_tree,
)
from deskagent.config import RetrievalToggles
from deskagent.env import load_task_dir
from deskagent.memory import HashEmbedder, MemoryStore
from deskagent.trace import read_trace, without_timing

from conftest import ACCEPTANCE, SCENARIOS, grid_observation, load_scenario, make_agent
from oracles import brute_force_topk, pixel_iou, sparse


@contextmanager
def criterion(name: str):
    """Record and print one pass/fail line; the details dict is filled by the body."""
    details: dict = {}
    try:
        yield details
    except BaseException as exc:
        line = (name, False, f"{type(exc).__name__}: {exc}".splitlines()[0][:300])
        raise
    else:
        line = (name, True, ", ".join(f"{k}={v}" for k, v in details.items()))
    finally:
        ACCEPTANCE.append(line)
        print(f"\n{'PASS' if line[1] else 'FAIL'}  {line[0]}: {line[2]}", file=sys.__stdout__, flush=True)


# -- 1. retrieval ---------------------------------------------------------------------


def test_retrieval_oracle_equivalence():
    with criterion("retrieval oracle equivalence") as d:
        vocab = [f"w{i}" for i in range(40)]
        embedder = HashEmbedder()
        checks = agree = 0
        elapsed = 0.0
        for seed in range(100):
            rng = random.Random(seed)
            n = rng.randint(1, 1000)
            texts = [" ".join(rng.choices(vocab, k=rng.randint(1, 4))) for _ in range(n)]
            stamps = iter([float(rng.randint(0, 20)) for _ in range(n)])  # collisions exercise the tie-break
            queries = [" ".join(rng.choices(vocab, k=rng.randint(1, 3))) for _ in range(2)]

            t0 = time.perf_counter()
            store = MemoryStore("narrative", embedder, clock=lambda: next(stamps))
            for text in texts:
                store.save_narrative(text, "summary", "success")
            got = {(q, k): [r.id for r in store.retrieve(q, k)] for q in queries for k in (1, 5)}
            elapsed += time.perf_counter() - t0

            table = [(r.id, r.created_at, sparse(r.key_embedding)) for r in store.records]
            for (q, k), ids in got.items():
                checks += 1
                agree += ids == brute_force_topk(sparse(embedder.embed(q)), table, k)
        d.update(queries=checks, agreement=f"{agree}/{checks}", seconds=round(elapsed, 2))
        assert agree == checks
        assert elapsed < 5.0, f"took {elapsed:.2f}s"


# -- 2. IOU ---------------------------------------------------------------------------


def test_iou_correctness():
    with criterion("IOU correctness") as d:
        rng = random.Random(2024)
        worst = 0.0
        for _ in range(1000):
            a = (rng.randint(0, 40), rng.randint(0, 40), rng.randint(1, 25), rng.randint(1, 25))
            b = (rng.randint(0, 40), rng.randint(0, 40), rng.randint(1, 25), rng.randint(1, 25))
            ba, bb = BoundingBox(*a), BoundingBox(*b)
            iou = compute_iou(ba, bb)
            worst = max(worst, abs(iou - pixel_iou(a, b)))
            assert iou == compute_iou(bb, ba), (a, b)
            assert compute_iou(ba, ba) == 1.0 and compute_iou(bb, bb) == 1.0
        d.update(pairs=1000, max_abs_error=worst)
        assert worst <= 1e-12


# -- 3. OCR augmentation -----------------------------------------------------------------


def _random_tree(rng):
    def node(depth):
        kids = [node(depth + 1) for _ in range(rng.randint(0, 3))] if depth < 3 else []
        return {"role": rng.choice(["button", "label", "panel"]), "name": f"n{rng.randint(0, 99)}",
                "bbox": [rng.randint(0, 60), rng.randint(0, 60), rng.randint(1, 20), rng.randint(1, 20)], "children": kids}
    return tag_tree([node(0) for _ in range(rng.randint(1, 3))])


def test_ocr_augmentation():
    with criterion("OCR augmentation") as d:
        rng = random.Random(7)
        appended_total = dropped_total = 0
        for trial in range(300):
            tree = _random_tree(rng)
            blocks = [OcrBlock(f"t{i}", BoundingBox(rng.randint(0, 70), rng.randint(0, 70), rng.randint(1, 20), rng.randint(1, 20)))
                      for i in range(rng.randint(0, 6))]
            threshold = rng.choice([0.0, 0.25, 0.5, 0.75, 1.0])
            expected = [b for b in blocks
                        if max((pixel_iou(b.bbox.as_tuple(), e.bbox.as_tuple()) for e in tree.nodes), default=0.0) <= threshold]
            out = augment_with_ocr(tree, blocks, threshold)
            assert out.nodes[: len(tree.nodes)] == tree.nodes
            assert out.parent == tree.parent
            added = out.nodes[len(tree.nodes):]
            assert [(e.name, e.bbox) for e in added] == [(b.text, b.bbox) for b in expected]
            assert [e.tag for e in added] == list(range(len(tree.nodes), len(tree.nodes) + len(added)))
            appended_total += len(added)
            dropped_total += len(blocks) - len(added)
        d.update(trials=300, appended=appended_total, dropped=dropped_total)
        assert appended_total and dropped_total


# -- 4. action compilation goldens --------------------------------------------------------

# Grid observation: tag t has bbox ((t%10)*100, (t//10)*30, 90, 20), so its
# center is ((t%10)*100 + 45, (t//10)*30 + 10).
GOLDEN = {
    'agent.click(41, 1, "left")': "pointer-move 145 130\nbutton-press left\nbutton-release left",
    "agent.hotkey(['ctrl', 'h'])": "key-press ctrl\nkey-press h\nkey-release h\nkey-release ctrl",
    "agent.drag_and_drop(55, 57)": "pointer-move 545 160\nbutton-press left\npointer-move 745 160\nbutton-release left",
    # one instance of every primitive
    'agent.click(86, 2, "right", ["ctrl"])': (
        "pointer-move 645 250\nkey-press ctrl\nbutton-press right\nbutton-release right\n"
        "button-press right\nbutton-release right\nkey-release ctrl"),
    'agent.type("3", 230, overwrite=True, enter=True)': (
        "pointer-move 45 700\nbutton-press left\nbutton-release left\nkey-press ctrl\nkey-press a\n"
        'key-release a\nkey-release ctrl\nkey-press backspace\nkey-release backspace\ntext-emit "3"\n'
        "key-press enter\nkey-release enter"),
    "agent.scroll(12, -3)": "pointer-move 245 40\nwheel -3",
    "agent.hold_and_press(['shift'], ['down', 'down'])": (
        "key-press shift\nkey-press down\nkey-release down\nkey-press down\nkey-release down\nkey-release shift"),
    'agent.drag_and_drop(55, 57, ["ctrl"])': (
        "pointer-move 545 160\nkey-press ctrl\nbutton-press left\npointer-move 745 160\n"
        "button-release left\nkey-release ctrl"),
    'agent.save_to_buffer("anonym-x2024@outlook.com")': 'buffer-store "anonym-x2024@outlook.com"',
    'agent.switch_applications("terminal")': 'app-activate "terminal"',
    "agent.wait(1)": "sleep 1000",
    "agent.done()": "",
    "agent.fail()": "",
}


def test_action_compilation_goldens():
    with criterion("action-compilation golden suite") as d:
        obs = grid_observation(250)
        kinds = set()
        mismatches = []
        for literal, golden in GOLDEN.items():
            action = parse_action(literal)
            kinds.add(action.kind)
            script = compile_action(action, obs)
            if script.to_text() != golden:
                mismatches.append(literal)
            assert script.is_balanced(), literal
            assert EventScript.from_text(golden) == script
        d.update(literals=len(GOLDEN), primitives=len(kinds), mismatches=len(mismatches))
        assert not mismatches, mismatches
        assert len(kinds) == 11


# -- 5. end-to-end Thunderbird ---------------------------------------------------------------


def test_thunderbird_end_to_end(tmp_path):
    with criterion("end-to-end Thunderbird reproduction") as d:
        task = load_scenario("thunderbird/remove_account.task.json")
        t0 = time.perf_counter()
        runs = [make_agent(tmp_path / f"run{i}", full_trace=True).run_task(task) for i in range(2)]
        elapsed = (time.perf_counter() - t0) / 2
        first = runs[0]
        events = read_trace(first.trace_path)
        actions = [e["payload"]["action"] for e in events if e["kind"] == "action"]
        clicks = [a for a in actions if a.startswith("agent.click(")]
        plan = next(e for e in events if e["kind"] == "plan")["payload"]["subtasks"]
        d.update(plan=plan, clicks=len(clicks), outcome=first.outcome, evaluator=first.evaluator, seconds=round(elapsed, 3))
        assert plan[0] == "Open Account Settings"
        assert clicks == ['agent.click(2, 1, "left")', 'agent.click(9, 1, "left")', 'agent.click(13, 1, "left")']
        assert actions[-1] == "agent.done()"
        assert [e["payload"]["terminal"] for e in events if e["kind"] == "episode"] == ["done", "done"]
        assert first.evaluator is True and first.outcome == "success"
        assert without_timing(events) == without_timing(read_trace(runs[1].trace_path))
        assert elapsed < 2.0


# -- 6. closed loop -------------------------------------------------------------------------


def test_closed_loop_protocol(tmp_path):
    with criterion("closed-loop protocol") as d:
        fail_run = make_agent(tmp_path / "a").run_task(load_scenario("autosave/autosave.task.json"))
        replans = fail_run.tracer.of_kind("replan")
        terminals = [e["payload"]["terminal"] for e in fail_run.tracer.of_kind("episode")]
        assert terminals[0] == "fail"
        assert len(replans) == 1 and fail_run.outcome == "success"

        agent = make_agent(tmp_path / "b")
        stuck = agent.run_task(load_scenario("stuck/stuck.task.json"))
        stuck_terminals = {e["payload"]["terminal"] for e in stuck.tracer.of_kind("episode")}
        [rec] = agent.narrative.records
        d.update(fail_scenario=f"{fail_run.outcome}/{len(replans)} replan", stuck_terminals=sorted(stuck_terminals),
                 stuck_iterations=stuck.iterations, narrative_outcome=rec.outcome)
        assert stuck_terminals == {"step_limit"}
        assert stuck.outcome == "failure" and rec.outcome == "failure"
        assert stuck.iterations == agent.config.max_steps_total


# -- 7. bootstrap / continual update ----------------------------------------------------------


def test_bootstrap_continual_update(tmp_path):
    with criterion("bootstrap and continual update") as d:
        agent = make_agent(tmp_path, script=str(SCENARIOS / "explore/explore.script.jsonl"),
                           search_stub_dir=str(SCENARIOS / "explore/search"))
        report = agent.run_exploration("env_independent", 2, load_scenario("explore/base.task.json"))
        reads = (agent.narrative.read_count, agent.episodic.read_count)
        probe = []
        for row in report.rows:
            events = read_trace(row["trace"])
            probe += [e for e in events if e["kind"] == "retrieval" and e["payload"]["source"] in ("narrative", "episodic")]
        web = sum(1 for row in report.rows for e in read_trace(row["trace"]) if e["kind"] == "retrieval")
        assert len(report.rows) == 2
        assert len(agent.narrative) > 0 and len(agent.episodic) > 0
        assert reads == (0, 0) and probe == []

        later = agent.run_task(load_scenario("thunderbird/remove_account.task.json"))
        [hit] = later.tracer.of_kind("retrieval", source="narrative")
        boot_ids = {r.id for r in agent.narrative.records[:report.narrative_after]}
        ep_hits = [h for e in later.tracer.of_kind("retrieval", source="episodic") for h in e["payload"]["hits"]]
        d.update(narrative=len(agent.narrative), episodic=len(agent.episodic), bootstrap_reads=sum(reads),
                 web_retrievals=web, later_narrative_hit=hit["payload"]["hits"], later_episodic_hits=ep_hits)
        assert hit["payload"]["hits"][0] in boot_ids and hit["payload"]["scores"][0] == 1.0
        assert ep_hits and ep_hits[0].startswith("e")


# -- 8. ablation toggles -----------------------------------------------------------------------


def test_ablation_toggles(tmp_path):
    with criterion("ablation toggles") as d:
        tasks = load_task_dir(SCENARIOS / "suite")
        assert len(tasks) == 4

        def counts(agent, results):
            found = {"web": 0, "narrative": 0, "episodic": 0}
            for r in results:
                for e in read_trace(r.trace_path):
                    if e["kind"] == "retrieval":
                        found[e["payload"]["source"]] += 1
            return found

        base = make_agent(tmp_path / "all", search_stub_dir=str(SCENARIOS / "explore/search"))
        baseline = counts(base, base.run_suite(tasks).results)
        assert all(baseline.values()), baseline

        seen = {}
        for off in ("web", "narrative", "episodic"):
            toggles = RetrievalToggles(**{off: False})
            agent = make_agent(tmp_path / off, toggles=toggles, search_stub_dir=str(SCENARIOS / "explore/search"))
            report = agent.run_suite(tasks)
            seen[off] = counts(agent, report.results)
            assert seen[off][off] == 0, (off, seen[off])
            if off != "web":
                store = agent.narrative if off == "narrative" else agent.episodic
                assert store.read_count == 0
        d.update(baseline=baseline, **{f"without_{k}": v[k] for k, v in seen.items()})


# -- 9. episodic gate ---------------------------------------------------------------------------


def test_episodic_gate(tmp_path):
    with criterion("episodic gate") as d:
        agent = make_agent(tmp_path, script=str(SCENARIOS / "explore/explore.script.jsonl"),
                           search_stub_dir=str(SCENARIOS / "explore/search"))
        results = []
        for sub in ("thunderbird", "autosave", "stuck", "suite"):
            results += agent.run_suite(load_task_dir(SCENARIOS / sub)).results
        agent.run_exploration("env_independent", 2, load_scenario("explore/base.task.json"))

        episodes = {}
        for path in (tmp_path / "traces").glob("*.jsonl"):
            for e in read_trace(path):
                if e["kind"] == "episode":
                    episodes.setdefault((e["run"], e["payload"]["title"]), []).append(e["payload"]["terminal"])
        reloaded = MemoryStore.open(tmp_path / "memory", "episodic", HashEmbedder())
        violations = [r.id for r in reloaded.records
                      if r.provenance.get("terminal") != "done"
                      or "done" not in episodes.get((r.provenance.get("run"), r.provenance.get("subtask")), ())]
        non_done = sum(1 for ts in episodes.values() for t in ts if t != "done")
        d.update(records=len(reloaded), episodes=sum(map(len, episodes.values())), non_done_episodes=non_done, violations=len(violations))
        assert len(reloaded) > 0 and non_done > 0
        assert violations == []

from __future__ import annotations

import json
from pathlib import Path

import pytest

from deskagent.aci import Observation, tag_tree
from deskagent.config import RunConfig
from deskagent.llm import ScriptedBackend, ScriptRule
from deskagent.orchestrator import Agent

ROOT = Path(__file__).resolve().parents[1]
SCENARIOS = ROOT / "scenarios"


def grid_box(tag: int) -> list[int]:
    """Deterministic layout used by grid observations: 10 columns of 90x20 cells."""
    return [(tag % 10) * 100, (tag // 10) * 30, 90, 20]


def grid_tree(n: int = 250):
    """Flat window with ``n - 1`` buttons; tag t sits at grid_box(t)."""
    children = [{"role": "button", "name": f"b{t}", "bbox": grid_box(t)} for t in range(1, n)]
    return tag_tree({"role": "window", "name": "grid", "bbox": grid_box(0), "children": children})


def grid_observation(n: int = 250, apps=("files", "terminal")) -> Observation:
    return Observation.from_tree(grid_tree(n), focused_app="files", apps=apps)


@pytest.fixture
def grid_obs():
    return grid_observation()


def scripted(*rules) -> ScriptedBackend:
    """Rules as (match, reply) or (match, reply, repeat) tuples."""
    return ScriptedBackend([ScriptRule(*r) for r in rules])


def make_agent(tmp_path, backend=None, memory=True, **cfg) -> Agent:
    config = RunConfig(
        memory_dir=str(tmp_path / "memory") if memory else "",
        trace_dir=str(tmp_path / "traces"),
        **cfg,
    )
    return Agent(config, backend=backend, memory_clock=_counter())


def _counter(start: float = 1_700_000_000.0):
    state = {"t": start}

    def clock():
        state["t"] += 1.0
        return state["t"]

    return clock


def read_jsonl(path):
    return [json.loads(l) for l in Path(path).read_text(encoding="utf-8").splitlines() if l.strip()]


def load_scenario(rel: str):
    from deskagent.env import load_task
    return load_task(SCENARIOS / rel)


def thunderbird_env():
    from deskagent.env import SimDesktop
    env = SimDesktop()
    obs = env.reset(load_scenario("thunderbird/remove_account.task.json"))
    return env, obs


# -- acceptance reporting ----------------------------------------------------

ACCEPTANCE: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")

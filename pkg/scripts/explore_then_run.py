"""Seed memory by exploration, then solve a task that reuses that experience.

    python scripts/explore_then_run.py [--out runs/explore]
"""
from __future__ import annotations

import argparse
from pathlib import Path

from deskagent.config import RunConfig
from deskagent.env import load_task
from deskagent.orchestrator import Agent, inspect_memory

ROOT = Path(__file__).resolve().parents[1]
SCEN = ROOT / "scenarios"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/explore")
    args = ap.parse_args()
    out = Path(args.out)
    cfg = RunConfig(memory_dir=str(out / "memory"), trace_dir=str(out / "traces"),
                    script=str(SCEN / "explore/explore.script.jsonl"), search_stub_dir=str(SCEN / "explore/search"))
    agent = Agent(cfg)
    report = agent.run_exploration("env_independent", 2, load_task(SCEN / "explore/base.task.json"))
    print("exploration:", [(r["instruction"], r["outcome"]) for r in report.rows])
    print(f"memory after bootstrap: {len(agent.narrative)} narrative, {len(agent.episodic)} episodic; "
          f"reads during bootstrap: {agent.narrative.read_count + agent.episodic.read_count}")

    result = agent.run_task(load_task(SCEN / "thunderbird/remove_account.task.json"))
    for e in result.tracer.of_kind("retrieval"):
        print(f"retrieval {e['payload']['source']}: hits={e['payload'].get('hits')} scores={e['payload'].get('scores')}")
    print(f"{result.task_id}: {result.outcome}\n")
    print(inspect_memory(cfg.memory_dir, "How to remove an email account in Thunderbird", k=3))


if __name__ == "__main__":
    main()

"""Scripted Thunderbird account removal, end to end, printing the trace.

    python scripts/run_thunderbird.py [--out runs/thunderbird]
"""
from __future__ import annotations

import argparse
from pathlib import Path

from deskagent.config import RunConfig
from deskagent.env import load_task
from deskagent.orchestrator import Agent
from deskagent.trace import read_trace

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/thunderbird")
    args = ap.parse_args()
    out = Path(args.out)
    cfg = RunConfig(memory_dir=str(out / "memory"), trace_dir=str(out / "traces"),
                    search_stub_dir=str(ROOT / "scenarios/explore/search"))
    result = Agent(cfg).run_task(load_task(ROOT / "scenarios/thunderbird/remove_account.task.json"))
    for e in read_trace(result.trace_path):
        p = e["payload"]
        if e["kind"] == "plan":
            print("plan:", " -> ".join(p["subtasks"]))
        elif e["kind"] == "action":
            print(f"  [{p['subtask']}.{p['step']}] {p['action']}  ({p['env_result']})")
        elif e["kind"] in ("episode", "replan", "save", "outcome"):
            print(f"{e['kind']}: {p}")
    print(f"\n{result.task_id}: {result.outcome}, {result.steps} steps, trace {result.trace_path}")


if __name__ == "__main__":
    main()

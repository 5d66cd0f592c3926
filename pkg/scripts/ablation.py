"""Retrieval ablation over the 4-task scripted suite.

Runs the suite once with every retrieval source on and once with each source
switched off, then tabulates success rate and retrieval events per source.
With scripted replies the success rates do not move; the point is that the
switched-off source never shows up in any trace.

    python scripts/ablation.py [--out runs/ablation]
"""
from __future__ import annotations

import argparse
from collections import Counter
from pathlib import Path

from deskagent.config import RetrievalToggles, RunConfig
from deskagent.env import load_task_dir
from deskagent.orchestrator import Agent
from deskagent.trace import read_trace

ROOT = Path(__file__).resolve().parents[1]
SETTINGS = {
    "full": RetrievalToggles(),
    "w/o web": RetrievalToggles(web=False),
    "w/o narrative": RetrievalToggles(narrative=False),
    "w/o episodic": RetrievalToggles(episodic=False),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/ablation")
    args = ap.parse_args()
    tasks = load_task_dir(ROOT / "scenarios/suite")
    print(f"{'setting':15s} {'success':>8s} {'web':>5s} {'narr':>5s} {'epis':>5s}")
    for name, toggles in SETTINGS.items():
        out = Path(args.out) / name.replace("/", "").replace(" ", "_")
        cfg = RunConfig(memory_dir=str(out / "memory"), trace_dir=str(out / "traces"), toggles=toggles,
                        search_stub_dir=str(ROOT / "scenarios/explore/search"))
        report = Agent(cfg).run_suite(tasks)
        seen = Counter(e["payload"]["source"] for r in report.results for e in read_trace(r.trace_path) if e["kind"] == "retrieval")
        print(f"{name:15s} {report.success_rate:8.0%} {seen['web']:5d} {seen['narrative']:5d} {seen['episodic']:5d}")


if __name__ == "__main__":
    main()

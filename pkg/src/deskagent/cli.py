"""Command line: run, suite, explore, memory inspect, validate-task.

Exit codes: 0 success, 1 task failure, 2 configuration error, 3 backend error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from deskagent.config import load_config
from deskagent.env import load_task, load_task_dir
from deskagent.errors import ConfigError, MissingStoreError, TaskLoadError
from deskagent.orchestrator import Agent, inspect_memory, make_embedder

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_BACKEND = 0, 1, 2, 3


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--backend", choices=["scripted", "http"])
    p.add_argument("--script", help="scripted-backend rules (JSON lines)")
    p.add_argument("--endpoint", help="chat endpoint base URL")
    p.add_argument("--model", dest="model_name")
    p.add_argument("--memory-dir")
    p.add_argument("--trace-dir")
    p.add_argument("--full-trace", action="store_true", default=None)
    p.add_argument("--max-steps-total", type=int)
    p.add_argument("--max-steps-per-subtask", type=int)
    p.add_argument("--max-replans", type=int)
    p.add_argument("--reflection-interval", type=int)
    p.add_argument("--iou-threshold", type=float)
    p.add_argument("--search", choices=["stub", "http", "disabled"])
    p.add_argument("--search-endpoint")
    p.add_argument("--search-stub-dir")
    p.add_argument("--seed", type=int)
    for name in ("web", "narrative", "episodic"):
        p.add_argument(f"--no-{name}", dest=name, action="store_false", default=None, help=f"disable {name} retrieval")


_NOT_CONFIG = {"command", "config", "task", "tasks", "files", "query", "k", "mode", "n", "base", "report", "parallelism", "verbose", "memory_command"}


def _config(args):
    overrides = {k: v for k, v in vars(args).items() if k not in _NOT_CONFIG}
    if getattr(args, "report", None):
        overrides["report_path"] = args.report
    if getattr(args, "parallelism", None):
        overrides["parallelism"] = args.parallelism
    return load_config(args.config, overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="deskagent", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one task file")
    p.add_argument("task")
    _common(p)

    p = sub.add_parser("suite", help="run every *.task.json in a directory")
    p.add_argument("tasks")
    p.add_argument("--report", help="write the JSON report here")
    p.add_argument("--parallelism", type=int)
    _common(p)

    p = sub.add_parser("explore", help="generate practice tasks and seed memory")
    p.add_argument("--base", required=True, help="task file whose desktop the practice tasks start from")
    p.add_argument("--mode", choices=["env_independent", "env_aware"], default="env_independent")
    p.add_argument("-n", type=int, default=50)
    _common(p)

    p = sub.add_parser("memory", help="memory utilities")
    msub = p.add_subparsers(dest="memory_command", required=True)
    ip = msub.add_parser("inspect", help="show top-k records for a query")
    ip.add_argument("query")
    ip.add_argument("-k", type=int, default=5)
    _common(ip)

    p = sub.add_parser("validate-task", help="check task files load and reset cleanly")
    p.add_argument("files", nargs="+")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return _dispatch(args)
    except (ConfigError, TaskLoadError, MissingStoreError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def _dispatch(args) -> int:
    if args.command == "validate-task":
        from deskagent.env import SimDesktop

        bad = 0
        for path in args.files:
            try:
                task = load_task(path)
                obs = SimDesktop().reset(task)
                print(f"ok   {path}: {task.id}, {len(obs.tree)} elements, {len(task.evaluator)} evaluator rules")
            except TaskLoadError as exc:
                bad += 1
                print(f"FAIL {path}: {exc}")
        return EXIT_CONFIG if bad else EXIT_OK

    cfg = _config(args)
    if args.command == "memory":
        print(inspect_memory(cfg.memory_dir, args.query, args.k, make_embedder(cfg)))
        return EXIT_OK

    agent = Agent(cfg)
    if args.command == "run":
        result = agent.run_task(load_task(args.task))
        print(f"{result.task_id}: {result.outcome} ({result.steps} steps, {result.replans} replans) trace={result.trace_path}")
        if result.error_kind == "backend":
            return EXIT_BACKEND
        if result.error_kind == "config":
            print(f"error: {result.error}", file=sys.stderr)
            return EXIT_CONFIG
        return EXIT_OK if result.success else EXIT_FAIL

    if args.command == "suite":
        report = agent.run_suite(load_task_dir(args.tasks))
        print(report.text())
        return EXIT_OK if report.success_rate == 1.0 else EXIT_FAIL

    if args.command == "explore":
        report = agent.run_exploration(args.mode, args.n, load_task(args.base))
        print(json.dumps({
            "tasks": len(report.rows),
            "errors": report.errors,
            "narrative": [report.narrative_before, report.narrative_after],
            "episodic": [report.episodic_before, report.episodic_after],
            "rows": report.rows,
        }, indent=2))
        return EXIT_OK
    raise AssertionError(args.command)

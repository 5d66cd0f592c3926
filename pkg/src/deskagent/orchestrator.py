"""The closed loop: plan, run subtask episodes, self-evaluate, update memory."""
from __future__ import annotations

import json
import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from deskagent.config import RetrievalToggles, RunConfig
from deskagent.env import EnvTask, SimDesktop, load_task_dir
from deskagent.errors import ConfigError, DeskAgentError, MissingStoreError, ModelError
from deskagent.llm import HttpChatBackend, ModelClient, ScriptedBackend
from deskagent.memory import HashEmbedder, HttpEmbedder, MemoryStore
from deskagent.memory.evaluator import summarize_episode, summarize_task, task_outcome
from deskagent.memory.exploration import bootstrap, generate_exploration_tasks
from deskagent.planner import Manager
from deskagent.search import DisabledSearch, HttpSearch, StubSearch
from deskagent.trace import Tracer
from deskagent.types import Query, TaskSpec
from deskagent.worker import Worker, failure_note

log = logging.getLogger(__name__)

REPORT_SCHEMA = 1


@dataclass
class RunResult:
    task_id: str
    outcome: str
    trace_path: Path | None
    steps: int = 0
    iterations: int = 0
    replans: int = 0
    duration: float = 0.0
    evaluator: bool | None = None
    error: str | None = None
    error_kind: str | None = None
    narrative_id: str | None = None
    episodic_ids: list = field(default_factory=list)
    tracer: Tracer | None = field(default=None, repr=False)

    @property
    def success(self) -> bool:
        return self.outcome == "success"

    def row(self) -> dict:
        return {
            "id": self.task_id,
            "outcome": self.outcome,
            "steps": self.steps,
            "replans": self.replans,
            "duration": round(self.duration, 3),
        }


@dataclass
class SuiteReport:
    results: list[RunResult]

    @property
    def success_rate(self) -> float:
        return sum(r.success for r in self.results) / len(self.results) if self.results else 0.0

    def to_dict(self) -> dict:
        return {
            "schema_version": REPORT_SCHEMA,
            "tasks": len(self.results),
            "successes": sum(r.success for r in self.results),
            "success_rate": self.success_rate,
            "total_steps": sum(r.steps for r in self.results),
            "rows": [r.row() for r in self.results],
        }

    def text(self) -> str:
        lines = [f"{'task':40s} {'outcome':8s} {'steps':>5s} {'replans':>7s}"]
        for r in self.results:
            lines.append(f"{r.task_id:40s} {r.outcome:8s} {r.steps:5d} {r.replans:7d}")
        lines.append(f"success rate: {self.success_rate:.2%} ({sum(r.success for r in self.results)}/{len(self.results)})")
        return "\n".join(lines)

    def write(self, path):
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")


def make_embedder(cfg: RunConfig):
    if cfg.embedding == "http":
        return HttpEmbedder(cfg.model.endpoint, cfg.embedding_model, cfg.embedding_dim, cfg.model.api_key, cfg.model.timeout)
    return HashEmbedder(cfg.embedding_dim)


def make_search(cfg: RunConfig):
    if cfg.search == "http":
        return HttpSearch(cfg.search_endpoint, cfg.model.timeout)
    if cfg.search == "stub":
        return StubSearch(cfg.search_stub_dir)
    return DisabledSearch()


class Agent:
    """One configured agent: shared memory stores plus per-run manager/worker wiring.

    Memory written by one task is visible to the next task immediately.
    """

    def __init__(self, config: RunConfig, backend=None, embedder=None, search=None, env_factory=None, memory_clock=time.time):
        self.config = config
        self.embedder = embedder or make_embedder(config)
        if config.memory_dir:
            self.narrative = MemoryStore.open(config.memory_dir, "narrative", self.embedder, memory_clock)
            self.episodic = MemoryStore.open(config.memory_dir, "episodic", self.embedder, memory_clock)
        else:
            self.narrative = MemoryStore("narrative", self.embedder, clock=memory_clock)
            self.episodic = MemoryStore("episodic", self.embedder, clock=memory_clock)
        self.search = search or make_search(config)
        self.env_factory = env_factory or (lambda: SimDesktop(config.iou_threshold))
        self._backend = backend
        self._shared = None
        self._run_ids: dict[str, int] = {}
        self._lock = threading.Lock()

    # -- wiring ----------------------------------------------------------------

    def backend_for(self, task: EnvTask | None):
        if self._backend is not None:
            return self._backend
        cfg = self.config
        if cfg.backend == "scripted" and task is not None and task.script:
            return ScriptedBackend.from_file(task.script)
        with self._lock:
            if self._shared is None:
                if cfg.backend == "http":
                    self._shared = HttpChatBackend(cfg.model)
                elif cfg.script:
                    self._shared = ScriptedBackend.from_file(cfg.script)
                else:
                    raise ConfigError("scripted backend needs a script (task 'script' field or config.script)")
            return self._shared

    def _run_id(self, task_id: str) -> str:
        with self._lock:
            n = self._run_ids.get(task_id, 0) + 1
            self._run_ids[task_id] = n
        base = f"{task_id}-s{self.config.seed}"
        return base if n == 1 else f"{base}-{n}"

    def _tracer(self, run_id: str) -> Tracer:
        path = Path(self.config.trace_dir) / f"{run_id}.jsonl" if self.config.trace_dir else None
        return Tracer(run_id, path, full=self.config.full_trace)

    # -- one task --------------------------------------------------------------

    def run_task(self, task: EnvTask, toggles: RetrievalToggles | None = None) -> RunResult:
        cfg = self.config
        toggles = toggles or cfg.toggles
        run_id = self._run_id(task.id)
        tracer = self._tracer(run_id)
        max_total = task.max_steps or cfg.max_steps_total
        tracer.emit("header", {
            "task": task.id,
            "instruction": task.instruction,
            "max_steps_total": max_total,
            "max_steps_per_subtask": cfg.max_steps_per_subtask,
            "max_replans": cfg.max_replans,
            "toggles": {"web": toggles.web, "narrative": toggles.narrative, "episodic": toggles.episodic},
            "reflection_interval": cfg.reflection_interval,
            "iou_threshold": cfg.iou_threshold,
            "seed": cfg.seed,
        })
        start = time.perf_counter()
        result = RunResult(task.id, "failure", tracer.path, tracer=tracer)
        try:
            self._loop(task, toggles, tracer, max_total, result)
        finally:
            result.duration = time.perf_counter() - start
            tracer.emit("outcome", {
                "outcome": result.outcome,
                "steps": result.steps,
                "iterations": result.iterations,
                "replans": result.replans,
                "evaluator": result.evaluator,
                "error": result.error,
            })
            tracer.close()
        return result

    def _loop(self, task: EnvTask, toggles, tracer: Tracer, max_total: int, result: RunResult):
        cfg = self.config
        try:
            client = ModelClient(self.backend_for(task), tracer)
        except ConfigError as exc:
            result.error, result.error_kind = str(exc), "config"
            tracer.emit("error", {"stage": "setup", "error": str(exc)})
            return
        spec = TaskSpec(task.instruction, task.id, max_total)
        manager = Manager(client, self.search, self.narrative, tracer, toggles, cfg.narrative_k, cfg.min_similarity)
        worker = Worker(client, self.episodic, tracer, toggles.episodic, cfg.reflection_interval, cfg.history_window, cfg.episodic_k, cfg.min_similarity)
        env = self.env_factory()
        trajectories = []
        first_query: Query | None = None
        all_done = False
        buffer: list[str] = []
        try:
            obs = env.reset(task)
            query, plan = manager.plan(spec, obs)
            first_query = query
            queue = list(plan)
            completed: list[str] = []
            while queue:
                remaining_budget = max_total - result.iterations
                if remaining_budget <= 0:
                    tracer.emit("warning", {"source": "budget", "error": "max_steps_total exhausted"})
                    break
                subtask = queue.pop(0)
                budget = min(cfg.max_steps_per_subtask, remaining_budget)
                traj = worker.run_episode(spec, query, subtask, env, budget, [s.title for s in queue], buffer)
                trajectories.append(traj)
                result.iterations += len(traj.steps)
                result.steps += traj.applied_steps
                if traj.terminal == "done":
                    completed.append(subtask.title)
                    self._save_episode(client, spec, query, traj, tracer, result)
                    if not queue:
                        all_done = True
                    continue
                # fail and step_limit both escalate to the manager
                if result.iterations >= max_total:
                    tracer.emit("warning", {"source": "budget", "error": "max_steps_total exhausted"})
                    break
                if result.replans >= cfg.max_replans:
                    tracer.emit("warning", {"source": "replan", "error": f"max_replans={cfg.max_replans} reached"})
                    break
                result.replans += 1
                note = failure_note(traj, cfg.failure_note_steps)
                query, plan = manager.replan(spec, env.observe(), note, completed)
                queue = list(plan)
                if not queue:
                    all_done = True
        except DeskAgentError as exc:
            result.error = f"{type(exc).__name__}: {exc}"
            result.error_kind = "backend" if isinstance(exc, ModelError) else "run"
            tracer.emit("error", {"stage": "loop", "error": result.error})
            all_done = False

        if task.evaluator:
            try:
                result.evaluator = env.evaluate()
            except DeskAgentError as exc:
                tracer.emit("error", {"stage": "evaluate", "error": str(exc)})
                result.evaluator = False
        result.outcome = task_outcome(all_done, result.evaluator)

        key = first_query.text if first_query else task.instruction
        try:
            summary, outcome = summarize_task(client, spec, key, trajectories, all_done, result.evaluator)
            result.narrative_id = self.narrative.save_narrative(key, summary, outcome)
            tracer.emit("save", {"store": "narrative", "id": result.narrative_id, "outcome": outcome})
        except DeskAgentError as exc:
            log.warning("task summary not saved: %s", exc)
            tracer.emit("warning", {"source": "task-summary", "error": str(exc)[:200]})

    def _save_episode(self, client, spec, query, traj, tracer, result):
        try:
            plan_text = summarize_episode(client, spec, traj)
            rec_id = self.episodic.save_episodic(
                query.text, traj.subtask.title, traj.subtask.context, plan_text,
                provenance={"run": tracer.run_id, "task": spec.id, "subtask": traj.subtask.title, "terminal": traj.terminal},
            )
        except DeskAgentError as exc:
            log.warning("episode summary not saved: %s", exc)
            tracer.emit("warning", {"source": "episode-summary", "error": str(exc)[:200]})
            return
        result.episodic_ids.append(rec_id)
        tracer.emit("save", {"store": "episodic", "id": rec_id, "terminal": traj.terminal})

    # -- batches ---------------------------------------------------------------

    def run_suite(self, tasks) -> SuiteReport:
        tasks = list(tasks)
        if not tasks:
            raise ConfigError("suite needs at least one task")

        def safe(task):
            try:
                return self.run_task(task)
            except Exception as exc:  # isolate per-task crashes
                log.exception("task %s crashed", task.id)
                return RunResult(task.id, "failure", None, error=str(exc), error_kind="run")

        if self.config.parallelism > 1:
            with ThreadPoolExecutor(self.config.parallelism) as pool:
                results = list(pool.map(safe, tasks))
        else:
            results = [safe(t) for t in tasks]
        report = SuiteReport(results)
        if self.config.report_path:
            report.write(self.config.report_path)
        return report

    def run_exploration(self, mode: str, n: int, base: EnvTask):
        """Generate ``n`` practice tasks on ``base``'s desktop and run them web-only."""
        tracer = self._tracer(f"explore-{base.id}-s{self.config.seed}")
        try:
            client = ModelClient(self.backend_for(None), tracer)
            if mode == "env_aware":
                obs = SimDesktop(self.config.iou_threshold).reset(base)
                texts = generate_exploration_tasks(client, mode, n, observation=obs)
            else:
                apps = self.config.apps or list(base.initial_state["apps"])
                texts = generate_exploration_tasks(client, mode, n, apps=apps)
        finally:
            tracer.close()
        tasks = [base.with_instruction(f"explore-{i:03d}", text) for i, text in enumerate(texts)]
        return bootstrap(self, tasks)


def load_tasks(cfg: RunConfig, source=None) -> list[EnvTask]:
    src = source or cfg.env_source
    if not src:
        raise ConfigError("no task source given")
    return load_task_dir(src)


def inspect_memory(memory_dir, query: str, k: int = 5, embedder=None, kinds=("narrative", "episodic")) -> str:
    """Ranked records with similarity scores, read-only."""
    d = Path(memory_dir)
    if not d.is_dir():
        raise MissingStoreError(f"memory directory {memory_dir} does not exist")
    files = {kind: d / f"{kind}.jsonl" for kind in kinds}
    if not any(p.exists() for p in files.values()):
        raise MissingStoreError(f"no memory files in {memory_dir}")
    embedder = embedder or HashEmbedder()
    out = []
    for kind, path in files.items():
        store = MemoryStore(kind, embedder, path if path.exists() else None)
        hits = store.search(query, k) if len(store) else []
        out.append(f"{kind}: {len(hits)} results")
        for rank, (rec, score) in enumerate(hits, 1):
            body = rec.summary if kind == "narrative" else rec.plan
            extra = f" [{rec.outcome}]" if kind == "narrative" else ""
            key = rec.key.replace("\n", " | ")
            out.append(f"  {rank}. {score:.4f} {rec.id}{extra} key={key!r}")
            out.append(f"     {body[:200]}")
    return "\n".join(out)

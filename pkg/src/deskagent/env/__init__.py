from deskagent.env.sim import Environment, RealDesktopAdapter, SimDesktop, SimState, StepResult, build_state
from deskagent.env.taskfile import EnvTask, load_task, load_task_dir, parse_task

__all__ = [
    "EnvTask", "Environment", "RealDesktopAdapter", "SimDesktop", "SimState", "StepResult",
    "build_state", "load_task", "load_task_dir", "parse_task",
]

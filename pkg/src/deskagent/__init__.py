"""Hierarchical GUI agent with experience memory and a bounded action interface."""
from deskagent.config import RetrievalToggles, RunConfig, load_config
from deskagent.orchestrator import Agent, RunResult, SuiteReport, inspect_memory

__version__ = "0.1.0"

__all__ = ["Agent", "RetrievalToggles", "RunConfig", "RunResult", "SuiteReport", "inspect_memory", "load_config"]

"""Narrative and episodic experience memory."""
from deskagent.memory.embedding import Embedder, HashEmbedder, HttpEmbedder, cosine
from deskagent.memory.evaluator import strip_grounded_actions, summarize_episode, summarize_task, task_outcome
from deskagent.memory.exploration import BootstrapReport, bootstrap, generate_exploration_tasks, parse_task_list
from deskagent.memory.store import EpisodicRecord, MemoryStore, NarrativeRecord, episodic_key

__all__ = [
    "BootstrapReport", "Embedder", "EpisodicRecord", "HashEmbedder", "HttpEmbedder", "MemoryStore", "NarrativeRecord",
    "bootstrap", "cosine", "episodic_key", "generate_exploration_tasks", "parse_task_list", "strip_grounded_actions",
    "summarize_episode", "summarize_task", "task_outcome",
]

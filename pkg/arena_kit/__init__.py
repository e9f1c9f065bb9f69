"""arena-kit: run agents against task-augmented arenas and collect trajectory datasets."""

__version__ = "0.3.0"

from .agent import Agent, TrainableAgent
from .arena import ActionTool, Arena, DummyTask, Task
from .dataset import TrajectoryDataset
from .registry import build_agent, build_arena, build_transform, retrieve_config
from .runner import evaluate, perform_parallel, perform_single, run, train_and_evaluate, validate

__all__ = [
    "ActionTool",
    "Agent",
    "Arena",
    "DummyTask",
    "Task",
    "TrainableAgent",
    "TrajectoryDataset",
    "build_agent",
    "build_arena",
    "build_transform",
    "evaluate",
    "perform_parallel",
    "perform_single",
    "retrieve_config",
    "run",
    "train_and_evaluate",
    "validate",
]

"""Arena, Task and ActionTool contracts.

An arena encapsulates dynamics, an action tool and a task. Tasks and tools
are stateless services that receive the arena as an argument, so either can
be swapped without touching the other.
"""

from abc import ABC, abstractmethod
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from .errors import ActionRejectedError, ArenaConfigError, CapabilityError, ProtocolError
from .logger import StepLogger
from .types import (
    MODES,
    ActionType,
    ArenaIdType,
    EpisodeConfig,
    InformationType,
    Space,
    episode_configs,
    make_rng,
)

EpisodeConfigLike = Union[EpisodeConfig, Dict[str, Any], None]


# ---------------------------------------------------------------------------
# Task
# ---------------------------------------------------------------------------

class Task(ABC):
    """Goal, reward, success and metric service bound to an arena."""

    name = "task"

    def reset(self, arena: "Arena") -> InformationType:
        return {}

    @abstractmethod
    def metric_names(self) -> List[str]:
        raise NotImplementedError

    @abstractmethod
    def compute_metrics(self, arena: "Arena") -> Dict[str, float]:
        raise NotImplementedError

    def evaluate(self, arena: "Arena", metrics: Optional[List[str]] = None) -> Dict[str, float]:
        """Return the requested metrics, or every metric when *metrics* is empty."""
        available = self.metric_names()
        unknown = [m for m in (metrics or []) if m not in available]
        if unknown:
            raise ArenaConfigError(
                f"Unknown metric(s) {', '.join(unknown)} for task '{self.name}'. "
                f"Available: {', '.join(available) or '(none)'}"
            )
        values = self.compute_metrics(arena)
        wanted = metrics or available
        return {m: float(values[m]) for m in wanted}

    @abstractmethod
    def success(self, arena: "Arena") -> bool:
        raise NotImplementedError

    @abstractmethod
    def reward(self, arena: "Arena") -> Dict[str, float]:
        raise NotImplementedError

    @abstractmethod
    def get_goal(self, arena: "Arena") -> InformationType:
        raise NotImplementedError


class DummyTask(Task):
    """Installed when no task is requested: no goals, no rewards, no metrics."""

    name = "dummy"

    def metric_names(self) -> List[str]:
        return []

    def compute_metrics(self, arena: "Arena") -> Dict[str, float]:
        return {}

    def success(self, arena: "Arena") -> bool:
        return False

    def reward(self, arena: "Arena") -> Dict[str, float]:
        return {}

    def get_goal(self, arena: "Arena") -> InformationType:
        return {}


# ---------------------------------------------------------------------------
# Action tool
# ---------------------------------------------------------------------------

class ActionTool(ABC):
    """Action-primitive layer interpreting agent actions against arena dynamics."""

    name = "action-tool"
    # runtime_checkable Protocol the arena must satisfy
    required_surface: Optional[type] = None

    def __init__(self, action_space: Space):
        self.action_space = action_space

    def get_action_space(self) -> Space:
        return self.action_space

    def sample_random_action(self, rng: np.random.Generator) -> ActionType:
        return self.action_space.sample(rng)

    def get_action_horizon(self) -> int:
        return 0

    @abstractmethod
    def get_no_op(self, arena: "Arena") -> ActionType:
        raise NotImplementedError

    def reset(self, arena: "Arena") -> InformationType:
        self.check_surface(arena)
        return {}

    def step(self, arena: "Arena", action: ActionType) -> InformationType:
        """Apply *action* to the arena's dynamics; returns tool-level information."""
        self.check_surface(arena)
        if not self.action_space.contains(action):
            raise ActionRejectedError(f"Action {action!r} is outside {self.action_space!r}")
        return self.apply(arena, action)

    @abstractmethod
    def apply(self, arena: "Arena", action: ActionType) -> InformationType:
        raise NotImplementedError

    def check_surface(self, arena: "Arena") -> None:
        if self.required_surface is not None and not isinstance(arena, self.required_surface):
            raise CapabilityError(
                f"Action tool '{self.name}' cannot drive arena '{arena.get_name()}': "
                f"it lacks the {self.required_surface.__name__} state surface"
            )


# ---------------------------------------------------------------------------
# Arena
# ---------------------------------------------------------------------------

class Arena(ABC):
    """Base arena implementing the episode protocol shared by every domain.

    Subclasses provide the dynamics through ``_reset_dynamics``,
    ``_observe`` and ``render``; the base class handles modes, eids, frames,
    rewards, evaluation and logging.
    """

    # mode -> half-open eid range; None means the episode count is undefined
    eid_ranges: Optional[Dict[str, Tuple[int, int]]] = None

    def __init__(self, action_tool: Optional[ActionTool] = None, task: Optional[Task] = None, horizon: int = 0):
        self.name: str = "arena"
        self.mode: str = "train"
        self.id: ArenaIdType = 0
        self.ray_handle: Dict[str, Any] = {"val": 0}
        self.disp: bool = False
        self.random_reset: bool = True
        self.logger = StepLogger("arena")
        self.action_tool = action_tool
        self.task: Task = task or DummyTask()
        self.horizon = int(horizon)
        self.frames: List[np.ndarray] = []

        self.eid: Optional[int] = None
        self.step_count: int = 0
        self.episode_return: float = 0.0
        self.episode_config: Optional[EpisodeConfig] = None
        self._active = False
        self._done = False
        self._seed = 0
        self._eid_rng = make_rng(0, 0)
        self._action_rng = make_rng(0, 0, 1)

    # -- identity and settings --

    def get_name(self) -> str:
        return self.name

    def set_log_dir(self, path: str) -> None:
        self.logger.set_log_dir(path)

    def set_disp(self, flg: bool) -> None:
        self.disp = bool(flg)

    def set_seed(self, seed: int) -> None:
        self._seed = int(seed)
        self._eid_rng = make_rng(self._seed, self.id)
        self._action_rng = make_rng(self._seed, self.id, 1)

    def setup_ray(self, id: ArenaIdType) -> None:
        """Assign the unique id used to tag this arena's informations in parallel runs."""
        if int(id) < 0:
            raise ArenaConfigError(f"Arena id must be non-negative, got {id}")
        self.id = int(id)
        self.ray_handle = {"val": self.id}
        self.set_seed(self._seed)

    def set_task(self, task: Task) -> None:
        self.task = task

    # -- modes and episodes --

    def set_train(self) -> None:
        self.mode = "train"

    def set_val(self) -> None:
        self.mode = "val"

    def set_eval(self) -> None:
        self.mode = "eval"

    def set_mode(self, mode: str) -> None:
        if mode not in MODES:
            raise ArenaConfigError(f"Unknown mode '{mode}'. Must be one of: {', '.join(MODES)}")
        getattr(self, f"set_{mode}")()

    def get_num_episodes(self) -> int:
        if not self.eid_ranges:
            return -1
        lo, hi = self.eid_ranges[self.mode]
        return hi - lo

    def get_eval_configs(self) -> List[EpisodeConfig]:
        if not self.eid_ranges:
            return []
        return episode_configs(range(*self.eid_ranges["eval"]), "eval")

    def get_val_configs(self) -> List[EpisodeConfig]:
        if not self.eid_ranges:
            return []
        return episode_configs(range(*self.eid_ranges["val"]), "val")

    def get_episode_config(self) -> Optional[EpisodeConfig]:
        return self.episode_config

    def _resolve_eid(self, config: EpisodeConfig) -> int:
        if not self.eid_ranges:
            return 0 if config.eid is None else int(config.eid)
        lo, hi = self.eid_ranges[self.mode]
        if config.eid is None:
            if self.random_reset:
                return int(lo + self._eid_rng.integers(hi - lo))
            return lo
        if not lo <= config.eid < hi:
            raise ArenaConfigError(
                f"eid {config.eid} is outside the {self.mode} range [{lo}, {hi}) of arena '{self.name}'"
            )
        return int(config.eid)

    # -- dynamics hooks --

    @abstractmethod
    def _reset_dynamics(self, eid: int) -> None:
        raise NotImplementedError

    @abstractmethod
    def _observe(self) -> InformationType:
        raise NotImplementedError

    @abstractmethod
    def render(self) -> np.ndarray:
        """Current u8 (H, W, 3) frame."""
        raise NotImplementedError

    # -- closed loop --

    def reset(self, episode_config: EpisodeConfigLike = None) -> InformationType:
        if isinstance(episode_config, EpisodeConfig):
            config = episode_config
        else:
            config = EpisodeConfig.from_dict(episode_config, mode=self.mode)
        eid = self._resolve_eid(config)
        self.episode_config = EpisodeConfig(eid=eid, save_video=config.save_video, mode=self.mode)
        self.eid = eid
        self.step_count = 0
        self.episode_return = 0.0
        self._done = False

        self._reset_dynamics(eid)
        self.task.reset(self)
        if self.action_tool is not None:
            self.action_tool.reset(self)
        self._active = True

        self.frames = []
        if config.save_video:
            self.frames.append(self.render())

        info = self._information()
        info["done"] = False
        return info

    def step(self, action: ActionType) -> InformationType:
        if not self._active:
            raise ProtocolError(f"Arena '{self.name}' has no active episode; call reset first")
        if self._done:
            raise ProtocolError(f"Episode {self.eid} of arena '{self.name}' is done; call reset")
        if not self.get_action_space().contains(action):
            raise ActionRejectedError(f"Action {action!r} is outside {self.get_action_space()!r}")

        tool_info = self.action_tool.step(self, action)
        self.step_count += 1

        reward = self.task.reward(self)
        self.episode_return += float(reward.get("task", 0.0))
        evaluation = self.task.evaluate(self, [])
        horizon = self.get_action_horizon()
        self._done = bool(self.task.success(self)) or (horizon > 0 and self.step_count >= horizon)

        if self.episode_config is not None and self.episode_config.save_video:
            self.frames.append(self.render())

        self.logger.log_step(
            {
                "arena_id": self.id,
                "eid": self.eid,
                "step": self.step_count,
                "payload": {"action": action, "evaluation": evaluation},
            }
        )

        info = self._information()
        info.update(tool_info)
        info["reward"] = reward
        info["evaluation"] = evaluation
        info["done"] = self._done
        return info

    def _information(self) -> InformationType:
        return {
            "observation": self._observe(),
            "arena_id": self.id,
            "eid": self.eid,
            "step": self.step_count,
            "goal": self.task.get_goal(self),
            "arena": self,
            "action_space": self.get_action_space(),
        }

    def is_done(self) -> bool:
        return self._done

    # -- accessors --

    def get_frames(self) -> List[np.ndarray]:
        return list(self.frames)

    def clear_frames(self) -> None:
        self.frames = []

    def get_goal(self) -> InformationType:
        return self.task.get_goal(self)

    def get_action_space(self) -> Space:
        return self.action_tool.get_action_space()

    def sample_random_action(self) -> ActionType:
        return self.action_tool.sample_random_action(self._action_rng)

    def get_no_op(self) -> ActionType:
        return self.action_tool.get_no_op(self)

    def get_action_horizon(self) -> int:
        return self.horizon or self.action_tool.get_action_horizon()

    def evaluate(self) -> Dict[str, float]:
        return self.task.evaluate(self, [])

    def success(self) -> bool:
        return bool(self.task.success(self))

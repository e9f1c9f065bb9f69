"""Line-walker: a one-dimensional reach domain with a continuous velocity action."""

from typing import Dict, List, Optional, Protocol, Tuple, runtime_checkable

import numpy as np

from ..arena import ActionTool, Arena, Task
from ..errors import CapabilityError
from ..types import ActionType, Box, Composite, InformationType, make_rng

REACH_TOLERANCE = 0.5
CELL_PX = 8


@runtime_checkable
class MovableSurface(Protocol):
    def move(self, delta: float) -> None: ...


@runtime_checkable
class ReachSurface(Protocol):
    def distance(self) -> float: ...

    def target_position(self) -> float: ...


class VelocityTool(ActionTool):
    name = "velocity"
    required_surface = MovableSurface

    def __init__(self, speed: float = 1.0):
        super().__init__(Composite({"velocity": Box([-1.0], [1.0])}))
        self.speed = float(speed)

    def get_no_op(self, arena: Arena) -> ActionType:
        return {"velocity": np.zeros(1, dtype=np.float32)}

    def apply(self, arena: Arena, action: ActionType) -> InformationType:
        arena.move(float(np.asarray(action["velocity"])[0]) * self.speed)
        return {}


class ReachTask(Task):
    name = "reach"

    def _surface(self, arena: Arena) -> ReachSurface:
        if not isinstance(arena, ReachSurface):
            raise CapabilityError(f"Task 'reach' needs a line-walker style arena, got '{arena.get_name()}'")
        return arena

    def metric_names(self) -> List[str]:
        return ["distance", "success", "return"]

    def compute_metrics(self, arena: Arena) -> Dict[str, float]:
        distance = self._surface(arena).distance()
        return {
            "distance": distance,
            "success": 1.0 if distance < REACH_TOLERANCE else 0.0,
            "return": arena.episode_return,
        }

    def success(self, arena: Arena) -> bool:
        return self._surface(arena).distance() < REACH_TOLERANCE

    def reward(self, arena: Arena) -> Dict[str, float]:
        return {"task": -self._surface(arena).distance()}

    def get_goal(self, arena: Arena) -> InformationType:
        return {"target": np.array([self._surface(arena).target_position()], dtype=np.float32)}


class LineWalkerArena(Arena):
    """Walker on ``[-size, size]``; the eid fixes integer start and target positions."""

    eid_ranges = {"train": (0, 100), "eval": (100, 120), "val": (120, 130)}

    def __init__(
        self,
        action_tool: Optional[ActionTool] = None,
        task: Optional[Task] = None,
        size: int = 10,
        horizon: int = 20,
    ):
        super().__init__(action_tool or VelocityTool(), task, horizon=horizon)
        self.name = "line-walker"
        self.size = int(size)
        self.x = 0.0
        self.target = 0.0

    # -- surfaces --

    def move(self, delta: float) -> None:
        self.x = float(np.clip(self.x + delta, -self.size, self.size))

    def distance(self) -> float:
        return abs(self.x - self.target)

    def target_position(self) -> float:
        return self.target

    # -- dynamics hooks --

    def _reset_dynamics(self, eid: int) -> None:
        rng = make_rng(eid)
        half = self.size // 2
        self.target = float(rng.integers(-half, half + 1))
        start = int(rng.integers(-self.size, self.size + 1))
        if start == self.target:
            start = start + 1 if start < self.size else start - 1
        self.x = float(start)

    def _observe(self) -> InformationType:
        return {
            "position": np.array([self.x], dtype=np.float32),
            "target": np.array([self.target], dtype=np.float32),
        }

    def render(self) -> np.ndarray:
        width = 2 * self.size + 1
        strip = np.full((1, width, 3), 40, dtype=np.uint8)
        strip[0, int(round(self.target)) + self.size] = (60, 180, 75)
        strip[0, int(round(self.x)) + self.size] = (230, 230, 230)
        return np.repeat(np.repeat(strip, CELL_PX, axis=0), CELL_PX, axis=1)


# ---------------------------------------------------------------------------
# Brute-force oracle on the discretized walker
# ---------------------------------------------------------------------------

MOVES = (-1, 0, 1)


def line_walker_model(size: int, target: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """Deterministic MDP over integer positions ``-size..size`` with unit moves.

    Returns ``(next_state, reward)`` tables of shape ``(2*size+1, 3)``; state
    ``s`` is position ``s - size`` and reward is ``-|x' - target|``.
    """
    n = 2 * size + 1
    next_state = np.zeros((n, len(MOVES)), dtype=np.int64)
    reward = np.zeros((n, len(MOVES)), dtype=np.float64)
    for s in range(n):
        x = s - size
        for a, dx in enumerate(MOVES):
            x2 = int(np.clip(x + dx, -size, size))
            next_state[s, a] = x2 + size
            reward[s, a] = -abs(x2 - target)
    return next_state, reward


def value_iteration(next_state: np.ndarray, reward: np.ndarray, gamma: float, tol: float = 1e-12,
                    max_iter: int = 100000) -> Tuple[np.ndarray, np.ndarray]:
    """Solve a deterministic tabular MDP; returns ``(V, greedy_policy)``.

    Ties in the greedy policy resolve to the lowest action index.
    """
    values = np.zeros(next_state.shape[0], dtype=np.float64)
    for _ in range(max_iter):
        q = reward + gamma * values[next_state]
        new_values = q.max(axis=1)
        if np.max(np.abs(new_values - values)) < tol:
            values = new_values
            break
        values = new_values
    q = reward + gamma * values[next_state]
    return values, np.argmax(q, axis=1)

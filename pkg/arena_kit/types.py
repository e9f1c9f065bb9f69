"""Shared value model: information trees, actions, action spaces and episode configs.

Tensors are ``numpy.ndarray`` values, trees are ``dict`` with string keys and
every other leaf is a plain Python scalar, string or bool.
"""

from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

from .errors import ArenaConfigError

InformationType = Dict[str, Any]
ActionType = Dict[str, Any]
ArenaIdType = int
ActionPhaseType = str

MODES = ("train", "val", "eval")
DEFAULT_PHASE = "none"

# Keys holding process-local handles; they never leave the producing process.
LOCAL_KEYS = ("arena", "action_space")


def value_get(root: Dict[str, Any], path: Sequence[str]) -> Optional[Any]:
    """Return the value stored at the nested *path*, or None when a segment is missing."""
    if not path:
        raise ValueError("path must be non-empty")
    node: Any = root
    for key in path:
        if not isinstance(node, dict) or key not in node:
            return None
        node = node[key]
    return node


def make_rng(*keys: int) -> np.random.Generator:
    """Derive a generator from integer keys; equal keys give bitwise-equal streams."""
    return np.random.default_rng(np.random.SeedSequence([int(k) & 0xFFFFFFFFFFFFFFFF for k in keys]))


# ---------------------------------------------------------------------------
# Spaces
# ---------------------------------------------------------------------------

class Space:
    def sample(self, rng: np.random.Generator) -> Any:
        raise NotImplementedError

    def contains(self, value: Any) -> bool:
        raise NotImplementedError

    def to_dict(self) -> Dict[str, Any]:
        raise NotImplementedError


class Box(Space):
    def __init__(self, low: Iterable[float], high: Iterable[float]):
        self.low = np.asarray(low, dtype=np.float32)
        self.high = np.asarray(high, dtype=np.float32)
        if self.low.shape != self.high.shape:
            raise ValueError(f"Box bounds differ in shape: {self.low.shape} vs {self.high.shape}")
        if np.any(self.low > self.high):
            raise ValueError("Box low must not exceed high")

    @property
    def shape(self):
        return self.low.shape

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        draw = rng.uniform(self.low.astype(np.float64), self.high.astype(np.float64))
        return np.clip(np.asarray(draw, dtype=np.float32), self.low, self.high)

    def contains(self, value: Any) -> bool:
        if isinstance(value, (dict, str, bool)):
            return False
        try:
            arr = np.asarray(value, dtype=np.float64)
        except (TypeError, ValueError):
            return False
        if arr.shape != self.shape or not np.all(np.isfinite(arr)):
            return False
        return bool(np.all(arr >= self.low) and np.all(arr <= self.high))

    def to_dict(self) -> Dict[str, Any]:
        return {"type": "box", "low": self.low.tolist(), "high": self.high.tolist()}

    def __repr__(self):
        return f"Box(low={self.low.tolist()}, high={self.high.tolist()})"


class Discrete(Space):
    def __init__(self, n: int):
        if int(n) <= 0:
            raise ValueError("Discrete space needs n > 0")
        self.n = int(n)

    def sample(self, rng: np.random.Generator) -> int:
        return int(rng.integers(self.n))

    def contains(self, value: Any) -> bool:
        if isinstance(value, (bool, np.bool_)):
            return False
        if isinstance(value, np.ndarray):
            if value.shape != () or not np.issubdtype(value.dtype, np.integer):
                return False
            value = int(value)
        if not isinstance(value, (int, np.integer)):
            return False
        return 0 <= int(value) < self.n

    def to_dict(self) -> Dict[str, Any]:
        return {"type": "discrete", "n": self.n}

    def __repr__(self):
        return f"Discrete({self.n})"


class Composite(Space):
    def __init__(self, spaces: Dict[str, Space]):
        if not spaces:
            raise ValueError("Composite space must be non-empty")
        self.spaces = dict(spaces)

    def sample(self, rng: np.random.Generator) -> Dict[str, Any]:
        return {name: space.sample(rng) for name, space in self.spaces.items()}

    def contains(self, value: Any) -> bool:
        if not isinstance(value, dict) or set(value) != set(self.spaces):
            return False
        return all(space.contains(value[name]) for name, space in self.spaces.items())

    def to_dict(self) -> Dict[str, Any]:
        return {"type": "composite", "spaces": {k: s.to_dict() for k, s in self.spaces.items()}}

    def __repr__(self):
        return f"Composite({self.spaces!r})"


def space_sample(space: Space, rng: np.random.Generator) -> Any:
    return space.sample(rng)


def space_contains(space: Space, value: Any) -> bool:
    return space.contains(value)


# ---------------------------------------------------------------------------
# Episode configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EpisodeConfig:
    eid: Optional[int] = None
    save_video: bool = False
    mode: str = "train"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ArenaConfigError(f"Unknown mode '{self.mode}'. Must be one of: {', '.join(MODES)}")
        if self.eid is not None and int(self.eid) < 0:
            raise ArenaConfigError(f"eid must be non-negative, got {self.eid}")

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]], mode: Optional[str] = None) -> "EpisodeConfig":
        data = dict(data or {})
        eid = data.get("eid")
        return cls(
            eid=None if eid is None else int(eid),
            save_video=bool(data.get("save_video", False)),
            mode=str(data.get("mode") or mode or "train"),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {"eid": self.eid, "save_video": self.save_video, "mode": self.mode}


def episode_configs(eids: Iterable[int], mode: str) -> List[EpisodeConfig]:
    return [EpisodeConfig(eid=e, save_video=False, mode=mode) for e in eids]

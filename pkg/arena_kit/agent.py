"""Agent and TrainableAgent contracts with per-arena state and checkpointing."""

import json
import os
import re
import shutil
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .config import Config
from .errors import CheckpointError, ProtocolError, UsageError
from .logger import StepLogger
from .types import DEFAULT_PHASE, ActionPhaseType, ActionType, ArenaIdType, InformationType
from .utils import tensor_checksum

CHECKPOINT_PREFIX = "checkpoint_"
_CHECKPOINT_RE = re.compile(r"^checkpoint_(\d+)$")
CHECKPOINT_FORMAT_VERSION = 1


class TrainWriter:
    """Append-only record of training scalars keyed by update step."""

    def __init__(self, path: Optional[Path] = None):
        self._records: List[Tuple[int, str, float]] = []
        self._last_step: Dict[str, int] = {}
        self._path: Optional[Path] = Path(path) if path else None

    def set_path(self, path: Optional[Path]) -> None:
        self._path = Path(path) if path else None

    @property
    def path(self) -> Optional[Path]:
        return self._path

    def add_scalar(self, key: str, value: float, update_step: int) -> None:
        update_step = int(update_step)
        last = self._last_step.get(key)
        if last is not None and update_step < last:
            raise UsageError(f"Update step for '{key}' went backwards: {update_step} < {last}")
        self._last_step[key] = update_step
        self._records.append((update_step, key, float(value)))
        if self._path is not None:
            self._path.parent.mkdir(parents=True, exist_ok=True)
            with open(self._path, "a", encoding="utf-8") as f:
                f.write(json.dumps({"update_step": update_step, "key": key, "value": float(value)}) + "\n")

    def scalars(self, key: Optional[str] = None) -> List[Tuple[int, str, float]]:
        if key is None:
            return list(self._records)
        return [r for r in self._records if r[1] == key]


class Agent(ABC):
    """Base class for every controller.

    Agents are arena-sensitive: each information carries ``arena_id`` and the
    agent keeps one internal state tree per arena it was reset for.
    """

    def __init__(self, config: Optional[Any] = None):
        self.config = Config(config)
        self.name: str = "agent"
        self.internal_states: Dict[ArenaIdType, Dict[str, Any]] = {}
        self.logger = StepLogger("agent")

    def get_name(self) -> str:
        return self.name

    def set_log_dir(self, path: str) -> None:
        self.logger.set_log_dir(path)

    def reset(self, arena_ids: List[ArenaIdType]) -> List[bool]:
        """Reset the agent before a new trial on *arena_ids*."""
        if not arena_ids:
            raise UsageError("reset needs at least one arena id")
        if len(set(arena_ids)) != len(arena_ids):
            raise UsageError(f"reset got duplicate arena ids: {list(arena_ids)}")
        self.internal_states = {int(arena_id): {} for arena_id in arena_ids}
        return [True for _ in arena_ids]

    def init(self, informations: List[InformationType]) -> List[bool]:
        """Initialise internal states from the reset informations."""
        for info in informations:
            self._state_for(info)
        return [True for _ in informations]

    def update(self, informations: List[InformationType], actions: List[ActionType]) -> List[bool]:
        """Update internal states given the current informations and actions."""
        if len(informations) != len(actions):
            raise UsageError(f"update got {len(informations)} informations but {len(actions)} actions")
        for info in informations:
            self._state_for(info)
        return [True for _ in informations]

    @abstractmethod
    def act(self, informations: List[InformationType], update: bool = False) -> List[ActionType]:
        """Produce one action per information, in input order."""
        raise NotImplementedError

    def success(self) -> Dict[ArenaIdType, bool]:
        return {arena_id: False for arena_id in self.internal_states}

    def terminate(self) -> Dict[ArenaIdType, bool]:
        return {arena_id: False for arena_id in self.internal_states}

    def get_phase(self) -> Dict[ArenaIdType, ActionPhaseType]:
        return {arena_id: DEFAULT_PHASE for arena_id in self.internal_states}

    def get_state(self) -> Dict[ArenaIdType, Dict[str, Any]]:
        return self.internal_states

    # -- helpers --

    def _state_for(self, information: InformationType) -> Dict[str, Any]:
        if "arena_id" not in information:
            raise ProtocolError("information is missing 'arena_id'")
        arena_id = int(information["arena_id"])
        if arena_id not in self.internal_states:
            raise ProtocolError(
                f"arena {arena_id} was not reset; tracked arenas: {sorted(self.internal_states)}"
            )
        return self.internal_states[arena_id]


class TrainableAgent(Agent):
    """Agent with a training loop and update-step-indexed checkpoints."""

    def __init__(self, config: Optional[Any] = None):
        super().__init__(config)
        self.name = "trainable-agent"
        self.train_writer = TrainWriter()
        self.update_steps: int = 0
        self.mode: str = "train"

    def set_log_dir(self, path: str) -> None:
        super().set_log_dir(path)
        self.train_writer.set_path(self.logger.component_dir / "train_log.jsonl")

    def get_train_writer(self) -> TrainWriter:
        return self.train_writer

    def train(self, update_steps: int, arenas: Optional[List[Any]] = None) -> bool:
        """Train for exactly *update_steps* parameter updates; False when untrainable."""
        return False

    def set_train(self) -> None:
        self.mode = "train"

    def set_eval(self) -> None:
        self.mode = "eval"

    # -- parameter hooks for subclasses --

    def checkpoint_arrays(self) -> Dict[str, np.ndarray]:
        return {}

    def check_arrays(self, arrays: Dict[str, np.ndarray]) -> None:
        """Raise ``CheckpointError`` unless *arrays* fit this agent; must not modify state."""

    def restore_arrays(self, arrays: Dict[str, np.ndarray]) -> None:
        pass

    # -- checkpointing --

    def checkpoint_dir(self, path: Optional[str] = None) -> Path:
        if path:
            return Path(path)
        if self.logger.component_dir is None:
            raise UsageError("No checkpoint path given and no log directory set")
        return self.logger.component_dir / "checkpoints"

    def list_checkpoints(self, path: Optional[str] = None) -> List[int]:
        try:
            root = self.checkpoint_dir(path)
        except UsageError:
            return []
        if not root.is_dir():
            return []
        steps = []
        for item in root.iterdir():
            m = _CHECKPOINT_RE.match(item.name)
            if m and item.is_dir():
                steps.append(int(m.group(1)))
        return sorted(steps)

    def save(self, path: Optional[str] = None) -> bool:
        """Write a checkpoint named by the current update-step count."""
        root = self.checkpoint_dir(path)
        target = root / f"{CHECKPOINT_PREFIX}{self.update_steps}"
        tmp = root / f".{target.name}.tmp"
        if tmp.exists():
            shutil.rmtree(tmp)
        tmp.mkdir(parents=True)

        arrays = self.checkpoint_arrays()
        manifest = {
            "format_version": CHECKPOINT_FORMAT_VERSION,
            "agent": self.name,
            "update_steps": self.update_steps,
            "arrays": {},
        }
        for name, arr in arrays.items():
            arr = np.ascontiguousarray(arr)
            np.save(tmp / f"{name}.npy", arr, allow_pickle=False)
            manifest["arrays"][name] = {
                "file": f"{name}.npy",
                "dtype": str(arr.dtype),
                "shape": list(arr.shape),
                "sha256": tensor_checksum(arr),
            }
        with open(tmp / "manifest.json", "w", encoding="utf-8") as f:
            json.dump(manifest, f, indent=2)

        if target.exists():
            shutil.rmtree(target)
        os.replace(tmp, target)
        return True

    def load(self, path: Optional[str] = None) -> int:
        """Load the latest checkpoint; returns its update step or -1."""
        steps = self.list_checkpoints(path)
        if not steps:
            return -1
        return steps[-1] if self.load_checkpoint(steps[-1], path) else -1

    def load_checkpoint(self, checkpoint: int, path: Optional[str] = None) -> bool:
        try:
            target = self.checkpoint_dir(path) / f"{CHECKPOINT_PREFIX}{int(checkpoint)}"
        except UsageError:
            return False
        if not target.is_dir():
            return False
        try:
            update_steps, arrays = self._read_checkpoint(target)
            self.check_arrays(arrays)
        except (CheckpointError, OSError, ValueError, KeyError):
            return False
        self.restore_arrays(arrays)
        self.update_steps = update_steps
        return True

    def _read_checkpoint(self, target: Path) -> Tuple[int, Dict[str, np.ndarray]]:
        with open(target / "manifest.json", "r", encoding="utf-8") as f:
            manifest = json.load(f)
        if manifest.get("format_version") != CHECKPOINT_FORMAT_VERSION:
            raise CheckpointError(f"Unsupported checkpoint format in {target}")
        arrays: Dict[str, np.ndarray] = {}
        for name, meta in manifest["arrays"].items():
            arr = np.load(target / meta["file"], allow_pickle=False)
            if str(arr.dtype) != meta["dtype"] or list(arr.shape) != meta["shape"]:
                raise CheckpointError(f"Array '{name}' does not match its manifest entry")
            if tensor_checksum(arr) != meta["sha256"]:
                raise CheckpointError(f"Array '{name}' failed its checksum")
            arrays[name] = arr
        return int(manifest["update_steps"]), arrays

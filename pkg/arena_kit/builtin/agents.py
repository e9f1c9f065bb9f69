"""Built-in agents: uniform random, tile-world oracle and a tabular Q-learner."""

from typing import Any, Dict, List, Optional

import numpy as np

from ..agent import Agent, TrainableAgent
from ..errors import CapabilityError, CheckpointError, ProtocolError, UsageError
from ..registry import register_agent
from ..types import ActionPhaseType, ActionType, ArenaIdType, InformationType, make_rng
from .line_walker import MOVES
from .tile_world import cell_to_norm, greedy_plan


def _trial_rng(seed: int, information: InformationType, salt: int = 0) -> np.random.Generator:
    eid = information.get("eid")
    return make_rng(seed, int(information["arena_id"]), -1 if eid is None else int(eid), salt)


@register_agent("random")
class RandomAgent(Agent):
    """Samples uniformly from each arena's action space."""

    def __init__(self, config: Optional[Any] = None):
        super().__init__(config)
        self.name = "random"
        self._rngs: Dict[ArenaIdType, np.random.Generator] = {}

    def reset(self, arena_ids: List[ArenaIdType]) -> List[bool]:
        self._rngs = {}
        return super().reset(arena_ids)

    def init(self, informations: List[InformationType]) -> List[bool]:
        for info in informations:
            state = self._state_for(info)
            state["steps"] = 0
            self._rngs[int(info["arena_id"])] = _trial_rng(int(self.config.get("seed", 0)), info)
        return [True for _ in informations]

    def act(self, informations: List[InformationType], update: bool = False) -> List[ActionType]:
        actions = []
        for info in informations:
            state = self._state_for(info)
            rng = self._rngs.get(int(info["arena_id"]))
            if rng is None:
                raise ProtocolError(f"init was not called for arena {info['arena_id']}")
            space = info.get("action_space")
            if space is None:
                raise CapabilityError("random agent needs 'action_space' in the information")
            actions.append(space.sample(rng))
            if update:
                state["steps"] += 1
        return actions


@register_agent("oracle-tile")
class OracleTileAgent(Agent):
    """Greedy planner reading the true tile-world state through the oracle handle.

    Each step moves the first stray tile (row-major) onto the first hole.
    """

    def __init__(self, config: Optional[Any] = None):
        super().__init__(config)
        self.name = "oracle-tile"

    @staticmethod
    def _tile_state(information: InformationType):
        arena = information.get("arena")
        if arena is None or not hasattr(arena, "tile_state"):
            raise CapabilityError("oracle-tile needs the tile-world oracle handle under 'arena'")
        return arena.tile_state()

    def init(self, informations: List[InformationType]) -> List[bool]:
        for info in informations:
            state = self._state_for(info)
            plan = greedy_plan(self._tile_state(info))
            state["plan"] = [[list(pick), list(place)] for pick, place in plan]
            state["emitted"] = 0
            state["plan_exhausted"] = not plan
        return [True for _ in informations]

    def act(self, informations: List[InformationType], update: bool = False) -> List[ActionType]:
        actions = []
        for info in informations:
            state = self._state_for(info)
            tiles = self._tile_state(info)
            plan = greedy_plan(tiles)
            space = info.get("action_space")
            num_pickers = max(1, len(getattr(space, "spaces", {})) // 2)
            corner = cell_to_norm((0, 0), tiles.size)

            action: ActionType = {}
            for i in range(num_pickers):
                if i < len(plan):
                    pick, place = plan[i]
                    action[f"pick_{i}"] = cell_to_norm(pick, tiles.size)
                    action[f"place_{i}"] = cell_to_norm(place, tiles.size)
                else:
                    action[f"pick_{i}"] = corner.copy()
                    action[f"place_{i}"] = corner.copy()
            actions.append(action)

            if update:
                state["emitted"] = state.get("emitted", 0) + 1
                state["plan"] = [[list(p), list(q)] for p, q in plan[num_pickers:]]
                state["plan_exhausted"] = len(plan) <= num_pickers
        return actions

    def success(self) -> Dict[ArenaIdType, bool]:
        return {i: bool(s.get("plan_exhausted", False)) for i, s in self.internal_states.items()}

    def terminate(self) -> Dict[ArenaIdType, bool]:
        return self.success()

    def get_phase(self) -> Dict[ArenaIdType, ActionPhaseType]:
        return {i: "done" if s.get("plan_exhausted") else "pick-and-place" for i, s in self.internal_states.items()}


@register_agent("tabular-q")
class TabularQAgent(TrainableAgent):
    """Epsilon-greedy tabular Q-learning on the line-walker.

    The state is the walker's offset from its target, rounded and clipped into
    ``num_buckets`` buckets; the three actions move left, stay or move right.
    """

    DEFAULTS = {
        "alpha": 0.1,
        "gamma": 0.95,
        "epsilon": 0.1,
        "alpha_decay": 0.0,
        "num_buckets": 41,
        "seed": 0,
    }

    def __init__(self, config: Optional[Any] = None):
        super().__init__(config)
        self.name = "tabular-q"
        for key, value in self.DEFAULTS.items():
            if key not in self.config:
                self.config.set(key, value)
        self.alpha = float(self.config.get("alpha"))
        self.gamma = float(self.config.get("gamma"))
        self.epsilon = float(self.config.get("epsilon"))
        self.alpha_decay = float(self.config.get("alpha_decay"))
        self.num_buckets = int(self.config.get("num_buckets"))
        self.seed = int(self.config.get("seed"))
        self.q_table = np.zeros((self.num_buckets, len(MOVES)), dtype=np.float64)
        self.visits = np.zeros((self.num_buckets, len(MOVES)), dtype=np.int64)
        self._rngs: Dict[ArenaIdType, np.random.Generator] = {}
        self._train_infos: Dict[ArenaIdType, InformationType] = {}
        self._train_cursor = 0
        self._td_window: List[float] = []

    # -- discretization --

    def bucket(self, observation: Dict[str, Any]) -> int:
        half = self.num_buckets // 2
        offset = float(np.asarray(observation["position"])[0] - np.asarray(observation["target"])[0])
        return int(np.clip(int(np.round(offset)), -half, half)) + half

    @staticmethod
    def action_index(action: ActionType) -> int:
        v = float(np.asarray(action["velocity"])[0])
        return int(np.clip(np.round(v), -1, 1)) + 1

    @staticmethod
    def index_action(index: int) -> ActionType:
        return {"velocity": np.array([MOVES[index]], dtype=np.float32)}

    def greedy(self, bucket: int) -> int:
        return int(np.argmax(self.q_table[bucket]))

    def select(self, bucket: int, rng: np.random.Generator) -> int:
        if self.mode == "train" and self.epsilon > 0 and rng.random() < self.epsilon:
            return int(rng.integers(len(MOVES)))
        return self.greedy(bucket)

    def backup(self, bucket: int, action: int, reward: float, next_bucket: int, terminal: bool) -> float:
        """One-step Q-learning backup; returns the TD error."""
        target = reward if terminal else reward + self.gamma * float(self.q_table[next_bucket].max())
        alpha = self.alpha / (1.0 + self.alpha_decay * float(self.visits[bucket, action]))
        td = target - float(self.q_table[bucket, action])
        self.q_table[bucket, action] += alpha * td
        self.visits[bucket, action] += 1
        return td

    # -- agent protocol --

    def reset(self, arena_ids: List[ArenaIdType]) -> List[bool]:
        self._rngs = {}
        return super().reset(arena_ids)

    def init(self, informations: List[InformationType]) -> List[bool]:
        for info in informations:
            state = self._state_for(info)
            state["bucket"] = self.bucket(info["observation"])
            self._rngs[int(info["arena_id"])] = _trial_rng(self.seed, info)
        return [True for _ in informations]

    def act(self, informations: List[InformationType], update: bool = False) -> List[ActionType]:
        """Choose one action per information.

        With ``update=True`` in train mode, the pending (state, action) pair from
        the previous call is first backed up against this information, and the
        new choice becomes the pending pair.
        """
        actions = []
        for info in informations:
            state = self._state_for(info)
            rng = self._rngs.get(int(info["arena_id"]))
            if rng is None:
                raise ProtocolError(f"init was not called for arena {info['arena_id']}")
            if update and self.mode == "train" and "action" in state and "reward" in info:
                self._learn(state, info, state["action"])
            bucket = self.bucket(info["observation"])
            index = self.select(bucket, rng)
            if update:
                state["bucket"] = bucket
                state["action"] = index
            actions.append(self.index_action(index))
        return actions

    def update(self, informations: List[InformationType], actions: List[ActionType]) -> List[bool]:
        """Back up each (state, action) pair against the information that followed it."""
        if len(informations) != len(actions):
            raise UsageError(f"update got {len(informations)} informations but {len(actions)} actions")
        if self.mode != "train":
            return super().update(informations, actions)
        for info, action in zip(informations, actions):
            state = self._state_for(info)
            if "bucket" not in state:
                raise ProtocolError(f"act or init must precede update for arena {info['arena_id']}")
            self._learn(state, info, self.action_index(action))
        return [True for _ in informations]

    def _learn(self, state: Dict[str, Any], information: InformationType, action: int) -> None:
        next_bucket = self.bucket(information["observation"])
        reward = float(information.get("reward", {}).get("task", 0.0))
        terminal = bool(information.get("done")) and information.get("evaluation", {}).get("success", 0.0) == 1.0
        td = self.backup(state["bucket"], action, reward, next_bucket, terminal)
        state["bucket"] = next_bucket
        state.pop("action", None)
        self.update_steps += 1
        self._td_window.append(abs(td))
        if len(self._td_window) >= 100:
            self.train_writer.add_scalar("abs_td_error", float(np.mean(self._td_window)), self.update_steps)
            self._td_window = []

    def train(self, update_steps: int, arenas: Optional[List[Any]] = None) -> bool:
        """Run exactly *update_steps* online backups, cycling episodes over *arenas*."""
        if update_steps <= 0:
            raise UsageError(f"update_steps must be positive, got {update_steps}")
        if self.mode != "train":
            raise UsageError("train requires the agent to be in train mode")
        if not arenas:
            return False

        # episodes never carry over between calls; the arenas may have been used for validation since
        self._train_infos = {}
        done_steps = 0
        while done_steps < update_steps:
            arena = arenas[self._train_cursor % len(arenas)]
            info = self._train_infos.get(arena.id)
            if info is None or info["done"]:
                arena.set_train()
                info = arena.reset()
                self.internal_states[arena.id] = {"bucket": self.bucket(info["observation"])}
                self._rngs[arena.id] = _trial_rng(self.seed, info, salt=self.update_steps + 1)

            action = self.act([info], update=True)[0]
            info = arena.step(action)
            self.update([info], [action])
            done_steps += 1

            if info["done"]:
                self.train_writer.add_scalar("episode_return", arena.episode_return, self.update_steps)
                self._train_cursor += 1
            self._train_infos[arena.id] = info
        return True

    # -- checkpoint hooks --

    def checkpoint_arrays(self) -> Dict[str, np.ndarray]:
        return {"q_table": self.q_table.copy(), "visits": self.visits.copy()}

    def check_arrays(self, arrays: Dict[str, np.ndarray]) -> None:
        for name in ("q_table", "visits"):
            if name not in arrays:
                raise CheckpointError(f"Checkpoint has no '{name}' array")
            if arrays[name].shape != self.q_table.shape:
                raise CheckpointError(
                    f"Checkpoint {name} shape {arrays[name].shape} does not match {self.q_table.shape}"
                )

    def restore_arrays(self, arrays: Dict[str, np.ndarray]) -> None:
        self.check_arrays(arrays)
        self.q_table = arrays["q_table"].astype(np.float64, copy=True)
        self.visits = arrays["visits"].astype(np.int64, copy=True)

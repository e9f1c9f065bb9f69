"""Closed-loop execution of agents on arenas.

Arenas are actors: each one is reset and stepped on a worker of a thread
pool, never by two workers at once. The agent is only ever called from the
coordinating thread, which gathers the latest information of every
unfinished arena, asks the agent for one batch of actions and scatters them
back. Trials that finish simply drop out of later batches.
"""

import copy
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Union

import numpy as np

from .agent import Agent, TrainableAgent
from .arena import Arena
from .errors import ArenaConfigError, ProtocolError, UsageError
from .logger import write_json_atomic
from .models import new_evaluation_report, new_trial_result
from .types import MODES, EpisodeConfig
from .utils import strip_local

EpisodeConfigLike = Union[EpisodeConfig, Dict[str, Any], None]
Log = Callable[[str], None]


def _as_config(config: EpisodeConfigLike, mode: Optional[str] = None) -> EpisodeConfig:
    if isinstance(config, EpisodeConfig):
        return config
    return EpisodeConfig.from_dict(config, mode=mode)


def _step_limit(arena: Arena, max_steps: Optional[int]) -> Optional[int]:
    """Explicit *max_steps* is exact (0 means no action); otherwise the
    arena's horizon, where a horizon of 0 means unbounded."""
    if max_steps is not None:
        if int(max_steps) < 0:
            raise UsageError(f"max_steps must be non-negative, got {max_steps}")
        return int(max_steps)
    horizon = arena.get_action_horizon()
    return horizon if horizon > 0 else None


def _rollout(
    arenas: Sequence[Arena],
    agent: Agent,
    configs: Sequence[EpisodeConfig],
    mode: str,
    max_steps: Optional[int],
    pool: Optional[ThreadPoolExecutor],
) -> List[Dict[str, Any]]:
    run = pool.map if pool is not None else map

    def _reset(pair):
        arena, config = pair
        arena.set_mode(mode)
        return arena.reset(config)

    infos = list(run(_reset, zip(arenas, configs)))
    ids = [arena.id for arena in arenas]
    agent.reset(ids)
    agent.init(infos)

    results = []
    for arena, info in zip(arenas, infos):
        result = new_trial_result(arena.id, arena.eid)
        result["information"].append(strip_local(info))
        results.append(result)
    latest = list(infos)
    limits = [_step_limit(arena, max_steps) for arena in arenas]

    def _record_states(indices):
        states = agent.get_state()
        for i in indices:
            state = copy.deepcopy(states.get(ids[i], {}))
            results[i]["internal_states"].append(state)
            step = len(results[i]["actions"])
            agent.logger.log_step(
                {"arena_id": ids[i], "eid": arenas[i].eid, "step": step, "payload": {"internal_state": state}}
            )

    def _still_running(i, terminated):
        steps = len(results[i]["actions"])
        if latest[i].get("done") or terminated.get(ids[i], False):
            return False
        return limits[i] is None or steps < limits[i]

    _record_states(range(len(arenas)))
    active = [i for i in range(len(arenas)) if _still_running(i, agent.terminate())]
    while active:
        actions = agent.act([latest[i] for i in active], update=True)
        if len(actions) != len(active):
            raise ProtocolError(f"Agent '{agent.get_name()}' returned {len(actions)} actions for {len(active)} arenas")

        stepped = list(run(lambda pair: arenas[pair[0]].step(pair[1]), zip(active, actions)))
        for i, action, info in zip(active, actions, stepped):
            latest[i] = info
            results[i]["actions"].append(copy.deepcopy(action))
            results[i]["information"].append(strip_local(info))
        _record_states(active)

        terminated = agent.terminate()
        active = [i for i in active if _still_running(i, terminated)]

    for arena, result in zip(arenas, results):
        result["evaluation"] = arena.evaluate()
        config = arena.get_episode_config()
        if config is not None and config.save_video:
            result["frames"] = arena.get_frames()
            arena.logger.save_frames(arena.eid, result["frames"])
    return results


def perform_single(
    arena: Arena,
    agent: Agent,
    mode: str = "train",
    max_steps: Optional[int] = None,
    episode_config: EpisodeConfigLike = None,
) -> Dict[str, Any]:
    """Run one trial from reset until done, agent termination or *max_steps*."""
    return _rollout([arena], agent, [_as_config(episode_config, mode)], mode, max_steps, None)[0]


def perform_parallel(
    arenas: Sequence[Arena],
    agents: Union[Agent, Sequence[Agent]],
    episode_configs: Sequence[EpisodeConfigLike],
    mode: str = "train",
    max_steps: Optional[int] = None,
    workers: Optional[int] = None,
    log: Optional[Log] = None,
) -> List[Dict[str, Any]]:
    """Run one trial per (arena, episode config) pair, results in input order.

    A single agent serves every arena with batched informations; a list of
    agents is run pair by pair without batching.
    """
    log = log or (lambda msg: None)
    if not arenas:
        return []
    if len(episode_configs) != len(arenas):
        raise UsageError(f"Got {len(arenas)} arenas but {len(episode_configs)} episode configs")
    ids = [arena.id for arena in arenas]
    if len(set(ids)) != len(ids):
        raise ArenaConfigError(f"Arena ids must be distinct, got {ids}; call setup_ray with unique ids")
    if mode not in MODES:
        raise ArenaConfigError(f"Unknown mode '{mode}'. Must be one of: {', '.join(MODES)}")
    configs = [_as_config(c, mode) for c in episode_configs]

    if not isinstance(agents, Agent):
        if len(agents) != len(arenas):
            raise UsageError(f"Got {len(agents)} agents for {len(arenas)} arenas")
        log(f"[RUN] {len(arenas)} arena(s), one agent per arena")
        return [perform_single(arena, agent, mode, max_steps, config)
                for arena, agent, config in zip(arenas, agents, configs)]

    log(f"[RUN] {len(arenas)} arena(s) batched through '{agents.get_name()}'")
    with ThreadPoolExecutor(max_workers=workers or len(arenas)) as pool:
        return _rollout(arenas, agents, configs, mode, max_steps, pool)


def run(agent: Agent, arena: Arena, episode_config: EpisodeConfigLike = None,
        max_steps: Optional[int] = None) -> Dict[str, Any]:
    """Single trial with the mode taken from *episode_config* (default train)."""
    config = _as_config(episode_config)
    return perform_single(arena, agent, config.mode, max_steps, config)


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

def _as_list(arena: Union[Arena, Sequence[Arena]]) -> List[Arena]:
    return [arena] if isinstance(arena, Arena) else list(arena)


def aggregate_metrics(trials: List[Dict[str, Any]]) -> Dict[str, Dict[str, float]]:
    names = sorted({name for trial in trials for name in trial["metrics"]})
    out = {}
    for name in names:
        values = np.array([trial["metrics"][name] for trial in trials if name in trial["metrics"]], dtype=np.float64)
        out[name] = {"mean": float(values.mean()), "std": float(values.std())}
    return out


def _sweep(
    kind: str,
    agent: Agent,
    arena: Union[Arena, Sequence[Arena]],
    log_dir: Optional[str],
    workers: Optional[int],
    log: Log,
) -> Dict[str, Any]:
    arenas = _as_list(arena)
    configs = arenas[0].get_eval_configs() if kind == "eval" else arenas[0].get_val_configs()
    if not configs:
        raise ArenaConfigError(f"Arena '{arenas[0].get_name()}' defines no {kind} episodes")
    if isinstance(agent, TrainableAgent):
        agent.set_eval()

    tag = "[EVAL]" if kind == "eval" else "[VALIDATE]"
    log(f"{tag} {len(configs)} {kind} episode(s) of '{arenas[0].get_name()}'")
    trials = []
    width = len(arenas)
    for start in range(0, len(configs), width):
        batch = configs[start:start + width]
        results = perform_parallel(arenas[:len(batch)], agent, batch, mode=kind, workers=workers)
        for result in results:
            trials.append({
                "eid": result["eid"],
                "steps": len(result["actions"]),
                "metrics": result["evaluation"],
            })

    checkpoint = agent.update_steps if isinstance(agent, TrainableAgent) else 0
    report = new_evaluation_report(kind, checkpoint)
    report["agent"] = agent.get_name()
    report["arena"] = arenas[0].get_name()
    report["trials"] = trials
    report["aggregate"] = aggregate_metrics(trials)
    report["created_at"] = datetime.now(timezone.utc).isoformat()

    root = Path(log_dir) if log_dir else agent.logger.log_dir
    if root is not None:
        path = write_json_atomic(root / f"{kind}_{checkpoint}.json", report)
        log(f"[OUTPUT] {kind} report: {path}")
    for name, stats in report["aggregate"].items():
        log(f"[STATS] {name}: mean {stats['mean']:.4f}  std {stats['std']:.4f}")
    return report


def evaluate(agent: Agent, arena: Union[Arena, Sequence[Arena]], log_dir: Optional[str] = None,
             workers: Optional[int] = None, log: Optional[Log] = None) -> Dict[str, Any]:
    """Run every eval episode and aggregate the task metrics."""
    return _sweep("eval", agent, arena, log_dir, workers, log or (lambda msg: None))


def validate(agent: Agent, arena: Union[Arena, Sequence[Arena]], log_dir: Optional[str] = None,
             workers: Optional[int] = None, log: Optional[Log] = None) -> Dict[str, Any]:
    """Run every validation episode and aggregate the task metrics."""
    return _sweep("val", agent, arena, log_dir, workers, log or (lambda msg: None))


def train_and_evaluate(
    agent: Agent,
    arena: Union[Arena, Sequence[Arena]],
    log_dir: Optional[str] = None,
    workers: Optional[int] = None,
    log: Optional[Log] = None,
) -> Dict[str, Any]:
    """Train to ``total_update_steps``, validating and checkpointing every
    ``validation_interval`` steps, then evaluate.

    Training resumes from the latest checkpoint found in the agent's log
    directory.
    """
    log = log or (lambda msg: None)
    if not isinstance(agent, TrainableAgent):
        raise UsageError(f"Agent '{agent.get_name()}' is not trainable")
    if log_dir and agent.logger.log_dir is None:
        agent.set_log_dir(log_dir)
    arenas = _as_list(arena)
    total = int(agent.config.get("total_update_steps", 0))
    interval = int(agent.config.get("validation_interval", total))
    if total <= 0:
        raise UsageError("Config needs a positive 'total_update_steps'")
    if interval <= 0:
        raise UsageError("Config needs a positive 'validation_interval'")

    resumed = agent.load()
    if resumed >= 0:
        log(f"[CHECKPOINT] Resumed from update step {resumed}")

    while agent.update_steps < total:
        steps = min(interval, total - agent.update_steps)
        agent.set_train()
        for a in arenas:
            a.set_train()
        log(f"[TRAIN] Update steps {agent.update_steps} -> {agent.update_steps + steps}")
        if not agent.train(steps, arenas):
            raise UsageError(f"Agent '{agent.get_name()}' could not be trained on '{arenas[0].get_name()}'")
        validate(agent, arenas, log_dir, workers, log)
        agent.save()
        log(f"[CHECKPOINT] Saved checkpoint_{agent.update_steps}")

    report = evaluate(agent, arenas, log_dir, workers, log)
    log("[SUCCESS] Training and evaluation complete")
    return report

"""CLI entry point for arena-kit."""

import argparse
import json
import re
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from . import __version__
from .agent import TrainableAgent
from .dataset import TrajectoryDataset, parse_dtype
from .errors import ArenaKitError, SchemaError, UsageError
from .logger import make_printer
from .models import new_collect_result
from .registry import build_agent, build_arena, retrieve_config
from .runner import evaluate, perform_parallel, train_and_evaluate
from .transforms import resize_image
from .types import EpisodeConfig
from .utils import to_jsonable
from .validator import TrajectoryStoreValidator

_printer = make_printer()

_SCHEMA_RE = re.compile(r"^(?P<name>[^:]+):(?P<shape>\d+(?:x\d+)*|scalar):(?P<dtype>[A-Za-z0-9]+)(?:->(?P<out>.+))?$")


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def parse_schema_flag(value: str) -> Dict[str, Dict[str, Any]]:
    """``name:HxWxC:dtype[->output_key]`` -> ``{name: {shape, dtype, output_key}}``."""
    m = _SCHEMA_RE.match(value.strip())
    if not m:
        raise SchemaError(f"Cannot read schema flag '{value}'; expected name:HxWxC:dtype[->output_key]")
    shape = [] if m.group("shape") == "scalar" else [int(d) for d in m.group("shape").split("x")]
    return {
        m.group("name"): {
            "shape": shape,
            "dtype": parse_dtype(m.group("dtype")).name,
            "output_key": m.group("out") or m.group("name"),
        }
    }


def _schema(flags: Optional[List[str]]) -> Dict[str, Dict[str, Any]]:
    out: Dict[str, Dict[str, Any]] = {}
    for flag in flags or []:
        out.update(parse_schema_flag(flag))
    return out


def _emit_json(data: Any) -> None:
    print(json.dumps(to_jsonable(data), indent=2, sort_keys=True))


def _header(title: str) -> None:
    _printer("=" * 70)
    _printer(title)
    _printer("=" * 70)


def _setup(args, count: int = 1):
    """Build the agent and *count* arenas with distinct ids from the shared flags."""
    config = retrieve_config(args.agent, args.arena, args.config)
    if args.seed is not None:
        config = config.merged({"seed": args.seed})
    agent = build_agent(args.agent, config)
    if args.log_dir:
        agent.set_log_dir(args.log_dir)

    arenas = []
    for i in range(count):
        arena = build_arena(args.arena)
        arena.setup_ray(i)
        if args.seed is not None:
            arena.set_seed(args.seed)
        if args.log_dir:
            arena.set_log_dir(args.log_dir)
        arenas.append(arena)
    _printer(f"[SETUP] Agent: {agent.get_name()}  Arena: {arenas[0].get_name()}  x{count}")
    return agent, arenas


def _workers(args) -> int:
    workers = getattr(args, "workers", None) or 1
    if workers < 1:
        raise UsageError(f"--workers must be at least 1, got {workers}")
    return workers


# ---------------------------------------------------------------------------
# Sub-command handlers
# ---------------------------------------------------------------------------

def cmd_run(args):
    eids = args.eid or [None]
    width = min(_workers(args), len(eids))
    _header("arena-kit run")
    agent, arenas = _setup(args, width)

    trials = []
    for start in range(0, len(eids), width):
        batch = [EpisodeConfig(eid=e, save_video=args.save_video, mode=args.mode) for e in eids[start:start + width]]
        results = perform_parallel(arenas[:len(batch)], agent, batch, mode=args.mode,
                                   max_steps=args.max_steps, workers=width, log=_printer)
        for res in results:
            _printer(f"[RUN] eid {res['eid']}: {len(res['actions'])} step(s)  {res['evaluation']}")
            trials.append({"eid": res["eid"], "steps": len(res["actions"]), "evaluation": res["evaluation"]})

    _emit_json({"agent": agent.get_name(), "arena": arenas[0].get_name(), "mode": args.mode, "trials": trials})
    return 0


def cmd_train(args):
    _header("arena-kit train")
    agent, arenas = _setup(args, _workers(args))
    report = train_and_evaluate(agent, arenas, args.log_dir, _workers(args), _printer)
    _emit_json(report)
    return 0


def cmd_evaluate(args):
    _header("arena-kit evaluate")
    agent, arenas = _setup(args, _workers(args))
    if isinstance(agent, TrainableAgent):
        if args.checkpoint is not None:
            if not agent.load_checkpoint(args.checkpoint):
                raise UsageError(f"Could not load checkpoint_{args.checkpoint} from {args.log_dir}")
            _printer(f"[CHECKPOINT] Loaded checkpoint_{args.checkpoint}")
        else:
            step = agent.load()
            if step < 0:
                _printer("[WARNING] No checkpoint found; evaluating the untrained agent")
            else:
                _printer(f"[CHECKPOINT] Loaded checkpoint_{step}")
    report = evaluate(agent, arenas, args.log_dir, _workers(args), _printer)
    _emit_json(report)
    return 0


def _observation_series(result, name: str, entry: Dict[str, Any]) -> List[np.ndarray]:
    shape, dtype = tuple(entry["shape"]), np.dtype(entry["dtype"])
    series = []
    for info in result["information"]:
        if name not in info["observation"]:
            raise SchemaError(f"Observation has no '{name}'; available: {', '.join(info['observation'])}")
        obs = np.asarray(info["observation"][name])
        if obs.shape != shape and obs.ndim == len(shape) and obs.ndim in (2, 3):
            src = obs if obs.dtype in (np.uint8, np.float32) else obs.astype(np.float32)
            obs = resize_image(src, shape[0], shape[1])
        series.append(obs.astype(dtype).reshape(shape))
    return series


def _action_series(result, name: str, entry: Dict[str, Any]) -> List[np.ndarray]:
    shape, dtype = tuple(entry["shape"]), np.dtype(entry["dtype"])
    series = []
    for action in result["actions"]:
        primitives = action[name] if isinstance(action.get(name), dict) else action
        flat = np.concatenate([np.ravel(np.asarray(v)) for v in primitives.values()])
        if flat.size != int(np.prod(shape)):
            raise SchemaError(f"Action with {flat.size} values cannot fill schema '{name}' of shape {list(shape)}")
        series.append(flat.reshape(shape).astype(dtype))
    return series


def cmd_collect(args):
    obs_config, act_config = _schema(args.obs), _schema(args.act)
    if not obs_config and not act_config:
        raise UsageError("collect needs at least one --obs or --act schema")

    _header("arena-kit collect")
    _printer(f"[COLLECT] Output: {args.out}")
    width = _workers(args)
    agent, arenas = _setup(args, width)
    dataset = TrajectoryDataset(
        data_path=args.out, io_mode="a", whole_trajectory=True,
        obs_config=obs_config, act_config=act_config,
        compression=args.compression, terminal_observation=True, log=_printer,
    )
    result = new_collect_result()
    result["output_path"] = str(Path(args.out).resolve())
    result["trials_requested"] = args.trials

    arenas[0].set_train()
    episodes = arenas[0].get_num_episodes()

    while dataset.num_trajectories() < args.trials:
        start = dataset.num_trajectories()
        count = min(width, args.trials - start)
        configs = [EpisodeConfig(eid=None if episodes < 0 else (start + k) % episodes, mode="train")
                   for k in range(count)]
        results = perform_parallel(arenas[:count], agent, configs, mode="train",
                                   max_steps=args.max_steps, workers=width)
        for res in results:
            observations = {k: _observation_series(res, k, v) for k, v in obs_config.items()}
            actions = {k: _action_series(res, k, v) for k, v in act_config.items()}
            index = dataset.add_trajectory(observations, actions)
            result["trials_added"] += 1
            _printer(f"[COLLECT] Trajectory {index}: eid {res['eid']}, {len(res['actions'])} step(s)")

    result["num_trajectories"] = dataset.num_trajectories()
    result["success"] = True
    _printer(f"[OK] Store holds {result['num_trajectories']} trajectories ({result['trials_added']} added)")
    _emit_json(result)
    return 0


def _check_store(path: str):
    result = TrajectoryStoreValidator(path, _printer).validate()
    for w in result["warnings"]:
        _printer(f"[WARNING] {w}")
    if not result["is_valid"]:
        _printer("")
        _printer("Validation failed:")
        for e in result["errors"]:
            _printer(f"  - {e}")
    return result


def cmd_inspect_data(args):
    _header("arena-kit inspect-data")
    check = _check_store(args.path)
    if not check["is_valid"]:
        return 1
    dataset = TrajectoryDataset(args.path, "r")
    manifest = dataset.manifest()
    summary = {
        "path": str(Path(args.path).resolve()),
        "num_trajectories": manifest["num_trajectories"],
        "lengths": manifest["lengths"],
        "obs_config": manifest["obs_config"],
        "act_config": manifest["act_config"],
        "goal_config": manifest["goal_config"],
        "compression": manifest["compression"],
        "terminal_observation": manifest["terminal_observation"],
        "split_ratios": manifest["split_ratios"],
        "splits": {name: len(dataset.split_indices(name)) for name in ("train", "val", "eval")},
    }
    _printer(f"[DATASET] {summary['num_trajectories']} trajectories, {sum(summary['lengths'])} steps")
    _emit_json(summary)
    return 0


def cmd_validate_data(args):
    _header("arena-kit validate-data")
    result = _check_store(args.path)
    _emit_json(result)
    if not result["is_valid"]:
        return 1
    _printer(f"[OK] {result['num_trajectories']} trajectories, {result['chunks_checked']} chunks decoded")
    return 0


# ---------------------------------------------------------------------------
# Main entry point
# ---------------------------------------------------------------------------

def _add_common(p, workers: bool = False):
    p.add_argument("--log-dir", type=str, default=None, help="Directory for logs, checkpoints and reports")
    p.add_argument("--seed", type=int, default=None, help="Seed for arenas and agent")
    if workers:
        p.add_argument("--workers", type=int, default=1, help="Number of arenas run concurrently (default: 1)")


def _add_agent_arena(p, config_default: str = "default"):
    p.add_argument("--agent", type=str, required=True, help="Agent string, e.g. 'tabular-q'")
    p.add_argument("--arena", type=str, required=True, help="Domain string, e.g. 'toy|domain:line-walker,task:reach'")
    p.add_argument("--config", type=str, default=config_default,
                   help=f"Config name under the config root (default: '{config_default}'; '' for none)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="arena-kit",
        description="arena-kit: run, train, evaluate and collect data with agents on arenas",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    # -- run --
    p_run = subparsers.add_parser("run", help="Run the agent for one trial per eid")
    _add_agent_arena(p_run)
    p_run.add_argument("--eid", type=int, nargs="*", default=None, help="Episode ids (default: one random episode)")
    p_run.add_argument("--mode", choices=["train", "val", "eval"], default="eval", help="Arena mode (default: eval)")
    p_run.add_argument("--max-steps", type=int, default=None, help="Step cap (default: the arena's horizon)")
    p_run.add_argument("--save-video", action="store_true", help="Dump frames under <log-dir>/arena/frames")
    _add_common(p_run, workers=True)

    # -- train --
    p_train = subparsers.add_parser("train", help="Train with periodic validation and checkpoints, then evaluate")
    _add_agent_arena(p_train)
    _add_common(p_train)
    p_train.set_defaults(workers=1)

    # -- evaluate --
    p_eval = subparsers.add_parser("evaluate", help="Evaluate the agent on the arena's eval episodes")
    _add_agent_arena(p_eval)
    p_eval.add_argument("--checkpoint", type=int, default=None, help="Checkpoint to load (default: latest)")
    _add_common(p_eval, workers=True)

    # -- collect --
    p_collect = subparsers.add_parser("collect", help="Collect trajectories into a trajectory store")
    _add_agent_arena(p_collect, config_default="")
    p_collect.add_argument("--out", type=str, required=True, help="Trajectory store directory")
    p_collect.add_argument("--trials", type=int, required=True, help="Target number of stored trajectories")
    p_collect.add_argument("--max-steps", type=int, default=None, help="Step cap per trial")
    p_collect.add_argument("--obs", action="append", default=None, metavar="NAME:HxWxC:DTYPE[->OUT]",
                           help="Observation schema entry (repeatable)")
    p_collect.add_argument("--act", action="append", default=None, metavar="NAME:HxW:DTYPE[->OUT]",
                           help="Action schema entry (repeatable)")
    p_collect.add_argument("--compression", choices=["none", "deflate"], default="deflate")
    _add_common(p_collect, workers=True)

    # -- inspect-data --
    p_inspect = subparsers.add_parser("inspect-data", help="Print a trajectory store summary as JSON")
    p_inspect.add_argument("--path", type=str, required=True, help="Trajectory store directory")
    _add_common(p_inspect)

    # -- validate-data --
    p_validate = subparsers.add_parser("validate-data", help="Decode and check every chunk of a trajectory store")
    p_validate.add_argument("--path", type=str, required=True, help="Trajectory store directory")
    _add_common(p_validate)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help()
        return 1

    dispatch = {
        "run": cmd_run,
        "train": cmd_train,
        "evaluate": cmd_evaluate,
        "collect": cmd_collect,
        "inspect-data": cmd_inspect_data,
        "validate-data": cmd_validate_data,
    }

    try:
        return dispatch[args.command](args)
    except KeyboardInterrupt:
        _printer("\n\n[CANCELLED] Operation cancelled by user")
        return 130
    except ArenaKitError as e:
        _printer(f"[ERROR] {e}")
        return 1
    except Exception as e:
        _printer(f"\n[ERROR] Unexpected error: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())

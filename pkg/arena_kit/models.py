"""Factory functions for result dictionaries."""

from typing import Any, Dict, Optional


def new_trial_result(arena_id: int = 0, eid: Optional[int] = None) -> Dict[str, Any]:
    return {
        "information": [],
        "actions": [],
        "internal_states": [],
        "evaluation": {},
        "eid": eid,
        "arena_id": arena_id,
        "frames": [],
    }


def new_evaluation_report(kind: str, checkpoint: int = 0) -> Dict[str, Any]:
    return {
        "kind": kind,
        "checkpoint": checkpoint,
        "agent": "",
        "arena": "",
        "trials": [],
        "aggregate": {},
        "created_at": "",
    }


def new_store_manifest() -> Dict[str, Any]:
    return {
        "format_version": 1,
        "obs_config": {},
        "act_config": {},
        "goal_config": {},
        "goals_per": "trajectory",
        "terminal_observation": False,
        "compression": "deflate",
        "num_trajectories": 0,
        "lengths": [],
        "split_ratios": {"train": 0.8, "val": 0.1, "eval": 0.1},
        "split_seed": 0,
    }


def new_store_validation_result() -> Dict[str, Any]:
    return {
        "is_valid": False,
        "path": "",
        "num_trajectories": 0,
        "chunks_checked": 0,
        "bad_index": None,
        "warnings": [],
        "errors": [],
    }


def new_collect_result() -> Dict[str, Any]:
    return {
        "success": False,
        "output_path": "",
        "trials_requested": 0,
        "trials_added": 0,
        "num_trajectories": 0,
        "warnings": [],
    }

"""Built-in toy arenas and agents, registered under the ``toy`` arena base.

    toy|domain:tile-world,action:pixel-pick-and-place(1),task:flattening
    toy|domain:line-walker,task:reach
"""

from typing import Dict

from ..errors import RegistryError
from ..registry import parse_int, parse_float, register_arena, split_call
from .agents import OracleTileAgent, RandomAgent, TabularQAgent
from .line_walker import LineWalkerArena, ReachTask, VelocityTool
from .tile_world import FlatteningTask, PixelPickAndPlace, TileWorldArena

# domain -> (arena class, default action, {action name: tool builder}, {task name: task class}, int params)
_DOMAINS = {
    "tile-world": (
        TileWorldArena,
        "pixel-pick-and-place(1)",
        {"pixel-pick-and-place": lambda arg: PixelPickAndPlace(int(arg or 1))},
        {"flattening": FlatteningTask},
        ("grid", "misplaced", "cell", "horizon"),
    ),
    "line-walker": (
        LineWalkerArena,
        "velocity",
        {"velocity": lambda arg: VelocityTool(1.0 if arg is None else float(arg))},
        {"reach": ReachTask},
        ("size", "horizon"),
    ),
}


@register_arena("toy")
def build_toy(params: Dict[str, str]):
    params = dict(params)
    domain = params.pop("domain", None)
    if domain not in _DOMAINS:
        raise RegistryError(
            f"Unknown toy domain '{domain}'. Registered: {', '.join(sorted(_DOMAINS))}"
        )
    arena_cls, default_action, tools, tasks, int_keys = _DOMAINS[domain]

    action_name, action_arg = split_call(params.pop("action", default_action))
    if action_name not in tools:
        raise RegistryError(
            f"Unknown action '{action_name}' for domain '{domain}'. Registered: {', '.join(sorted(tools))}"
        )
    if "speed" in params:
        if action_name != "velocity":
            raise RegistryError("Parameter 'speed' only applies to the velocity action")
        action_arg = str(parse_float(params.pop("speed"), "speed"))
    try:
        tool = tools[action_name](action_arg)
    except ValueError as e:
        raise RegistryError(f"Bad argument for action '{action_name}': {e}") from None

    task = None
    task_name = params.pop("task", None)
    if task_name not in (None, "", "none"):
        if task_name not in tasks:
            raise RegistryError(
                f"Unknown task '{task_name}' for domain '{domain}'. Registered: {', '.join(sorted(tasks))}"
            )
        task = tasks[task_name]()

    seed = parse_int(params.pop("seed"), "seed") if "seed" in params else 0
    kwargs = {key: parse_int(params.pop(key), key) for key in int_keys if key in params}
    if params:
        raise RegistryError(
            f"Unknown parameter(s) {', '.join(sorted(params))} for toy domain '{domain}'. "
            f"Accepted: domain, action, task, seed, disp, {', '.join(int_keys)}"
        )

    arena = arena_cls(tool, task, **kwargs)
    arena.set_seed(seed)
    return arena


__all__ = [
    "FlatteningTask",
    "LineWalkerArena",
    "OracleTileAgent",
    "PixelPickAndPlace",
    "RandomAgent",
    "ReachTask",
    "TabularQAgent",
    "TileWorldArena",
    "VelocityTool",
    "build_toy",
]

import numpy as np
import pytest

from arena_kit.agent import Agent
from arena_kit.registry import build_agent, build_arena

TILE_WORLD = "toy|domain:tile-world,action:pixel-pick-and-place(1),task:flattening"
LINE_WALKER = "toy|domain:line-walker,task:reach"


class FixedAgent(Agent):
    """Always answers with the arena's no-op; used to drive arenas from tests."""

    def __init__(self, config=None):
        super().__init__(config)
        self.name = "fixed"

    def act(self, informations, update=False):
        return [info["arena"].get_no_op() for info in informations]


@pytest.fixture(autouse=True)
def _bundled_configs(monkeypatch):
    monkeypatch.delenv("ARENA_KIT_CONFIG_DIR", raising=False)


@pytest.fixture
def tile_arenas():
    def _make(count=1):
        arenas = []
        for i in range(count):
            arena = build_arena(TILE_WORLD)
            arena.setup_ray(i)
            arenas.append(arena)
        return arenas
    return _make


@pytest.fixture
def line_arena():
    arena = build_arena(LINE_WALKER)
    arena.setup_ray(0)
    return arena


@pytest.fixture
def oracle():
    return build_agent("oracle-tile")


@pytest.fixture
def fixed_agent():
    return FixedAgent()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)

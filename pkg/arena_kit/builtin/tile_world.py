"""Tile-world: a deterministic flattening stand-in driven by normalized pick-and-place.

The grid holds G×G cells. A cell is *flat* when its tile lies in place and a
*hole* otherwise; every displaced tile sits on top of some other cell as a
*stray* tile. Picking a stray tile and placing it on a hole flattens that
cell. Coverage is the fraction of flat cells.

The oracle handle (``information["arena"]``) exposes :meth:`TileWorldArena.tile_state`,
returning a :class:`TileWorldState` copy.
"""

from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Protocol, Tuple, runtime_checkable

import numpy as np

from ..arena import ActionTool, Arena, Task
from ..errors import CapabilityError
from ..types import ActionType, Box, Composite, InformationType, make_rng

Cell = Tuple[int, int]

FLAT_COLOR = (205, 205, 205)
HOLE_COLOR = (25, 25, 25)
STRAY_COLOR = (200, 70, 60)


@dataclass
class TileWorldState:
    grid: np.ndarray   # bool (G, G); True = flat
    stray: np.ndarray  # int64 (G, G); displaced tiles lying on each cell

    @property
    def size(self) -> int:
        return int(self.grid.shape[0])

    def copy(self) -> "TileWorldState":
        return TileWorldState(self.grid.copy(), self.stray.copy())

    def coverage(self) -> float:
        return float(self.grid.sum()) / float(self.grid.size)

    def misplaced(self) -> int:
        return int((~self.grid).sum())


def initial_layout(eid: int, grid_size: int = 8, misplaced: int = 3) -> TileWorldState:
    """Layout for *eid*: the first *misplaced* cells of a permutation seeded by the eid
    are holes; the next *misplaced* cells carry their stray tiles."""
    cells = grid_size * grid_size
    if not 0 <= 2 * misplaced <= cells:
        raise ValueError(f"Cannot misplace {misplaced} tiles on a {grid_size}x{grid_size} grid")
    perm = make_rng(eid).permutation(cells)
    grid = np.ones((grid_size, grid_size), dtype=bool)
    stray = np.zeros((grid_size, grid_size), dtype=np.int64)
    grid.flat[perm[:misplaced]] = False
    stray.flat[perm[misplaced:2 * misplaced]] = 1
    return TileWorldState(grid, stray)


def tileworld_dynamics(state: TileWorldState, pick_cell: Cell, place_cell: Cell) -> Tuple[TileWorldState, bool]:
    """Move one stray tile from *pick_cell* to *place_cell*.

    Returns the new state and whether the pick hit a stray tile. Picking a
    cell without a stray tile is a miss and leaves the state unchanged, as
    does ``pick_cell == place_cell``.
    """
    g = state.size
    for r, c in (pick_cell, place_cell):
        if not (0 <= r < g and 0 <= c < g):
            raise ValueError(f"Cell {(r, c)} is outside the {g}x{g} grid")
    hit = bool(state.stray[pick_cell] > 0)
    if not hit or tuple(pick_cell) == tuple(place_cell):
        return state.copy(), hit

    out = state.copy()
    out.stray[pick_cell] -= 1
    if out.grid[place_cell]:
        out.stray[place_cell] += 1
    else:
        out.grid[place_cell] = True
    return out, hit


def greedy_plan(state: TileWorldState) -> List[Tuple[Cell, Cell]]:
    """Pair stray tiles with holes in row-major order; one move per hole."""
    holes = [tuple(int(v) for v in rc) for rc in np.argwhere(~state.grid)]
    strays: List[Cell] = []
    for rc in np.argwhere(state.stray > 0):
        strays.extend([tuple(int(v) for v in rc)] * int(state.stray[tuple(rc)]))
    return list(zip(strays, holes))


def norm_to_cell(point: np.ndarray, grid_size: int) -> Cell:
    """Map normalized (x, y) in [0, 1]^2 to a (row, col) cell."""
    x, y = float(point[0]), float(point[1])
    col = min(int(x * grid_size), grid_size - 1)
    row = min(int(y * grid_size), grid_size - 1)
    return row, col


def cell_to_norm(cell: Cell, grid_size: int) -> np.ndarray:
    row, col = cell
    return np.array([(col + 0.5) / grid_size, (row + 0.5) / grid_size], dtype=np.float32)


# ---------------------------------------------------------------------------
# Surfaces
# ---------------------------------------------------------------------------

@runtime_checkable
class PickPlaceSurface(Protocol):
    def grid_size(self) -> int: ...

    def pick_and_place(self, pick_cell: Cell, place_cell: Cell) -> bool: ...


@runtime_checkable
class CoverageSurface(Protocol):
    def coverage(self) -> float: ...

    def grid_size(self) -> int: ...


# ---------------------------------------------------------------------------
# Action tool and task
# ---------------------------------------------------------------------------

class PixelPickAndPlace(ActionTool):
    """Normalized-pixel pick-and-place with ``num_pickers`` pick/place pairs."""

    name = "pixel-pick-and-place"
    required_surface = PickPlaceSurface

    def __init__(self, num_pickers: int = 1):
        if num_pickers < 1:
            raise ValueError("pixel-pick-and-place needs at least one picker")
        self.num_pickers = int(num_pickers)
        spaces = {}
        for i in range(self.num_pickers):
            spaces[f"pick_{i}"] = Box([0.0, 0.0], [1.0, 1.0])
            spaces[f"place_{i}"] = Box([0.0, 0.0], [1.0, 1.0])
        super().__init__(Composite(spaces))

    def get_no_op(self, arena: Arena) -> ActionType:
        self.check_surface(arena)
        corner = cell_to_norm((0, 0), arena.grid_size())
        action = {}
        for i in range(self.num_pickers):
            action[f"pick_{i}"] = corner.copy()
            action[f"place_{i}"] = corner.copy()
        return action

    def apply(self, arena: Arena, action: ActionType) -> InformationType:
        g = arena.grid_size()
        missed = False
        for i in range(self.num_pickers):
            pick = norm_to_cell(action[f"pick_{i}"], g)
            place = norm_to_cell(action[f"place_{i}"], g)
            missed |= not arena.pick_and_place(pick, place)
        return {"no_pick": missed}


class FlatteningTask(Task):
    name = "flattening"

    def _surface(self, arena: Arena) -> CoverageSurface:
        if not isinstance(arena, CoverageSurface):
            raise CapabilityError(f"Task 'flattening' needs a tile-world style arena, got '{arena.get_name()}'")
        return arena

    def metric_names(self) -> List[str]:
        return ["coverage", "success"]

    def compute_metrics(self, arena: Arena) -> Dict[str, float]:
        coverage = self._surface(arena).coverage()
        return {"coverage": coverage, "success": 1.0 if coverage == 1.0 else 0.0}

    def success(self, arena: Arena) -> bool:
        return self._surface(arena).coverage() == 1.0

    def reward(self, arena: Arena) -> Dict[str, float]:
        return {"task": self._surface(arena).coverage()}

    def get_goal(self, arena: Arena) -> InformationType:
        g = self._surface(arena).grid_size()
        return {"mask": np.ones((g, g), dtype=bool)}


# ---------------------------------------------------------------------------
# Arena
# ---------------------------------------------------------------------------

class TileWorldArena(Arena):
    eid_ranges = {"train": (0, 100), "eval": (100, 120), "val": (120, 130)}

    def __init__(
        self,
        action_tool: Optional[ActionTool] = None,
        task: Optional[Task] = None,
        grid: int = 8,
        misplaced: int = 3,
        cell: int = 16,
        horizon: int = 3,
    ):
        super().__init__(action_tool or PixelPickAndPlace(1), task, horizon=horizon)
        self.name = "tile-world"
        self._grid_size = int(grid)
        self._misplaced = int(misplaced)
        self._cell_px = int(cell)
        self._state = TileWorldState(
            np.ones((self._grid_size, self._grid_size), dtype=bool),
            np.zeros((self._grid_size, self._grid_size), dtype=np.int64),
        )

    # -- surfaces --

    def grid_size(self) -> int:
        return self._grid_size

    def coverage(self) -> float:
        return self._state.coverage()

    def pick_and_place(self, pick_cell: Cell, place_cell: Cell) -> bool:
        self._state, hit = tileworld_dynamics(self._state, pick_cell, place_cell)
        return hit

    def tile_state(self) -> TileWorldState:
        return self._state.copy()

    # -- dynamics hooks --

    def _reset_dynamics(self, eid: int) -> None:
        self._state = initial_layout(eid, self._grid_size, self._misplaced)

    def _observe(self) -> InformationType:
        return {"rgb": self.render()}

    def render(self) -> np.ndarray:
        colors = np.empty((self._grid_size, self._grid_size, 3), dtype=np.uint8)
        colors[...] = FLAT_COLOR
        colors[~self._state.grid] = HOLE_COLOR
        colors[self._state.stray > 0] = STRAY_COLOR
        return np.repeat(np.repeat(colors, self._cell_px, axis=0), self._cell_px, axis=1)

    def describe(self) -> Dict[str, Any]:
        return {"grid": self._grid_size, "misplaced": self._misplaced, "cell": self._cell_px}

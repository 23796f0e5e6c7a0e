"""Four-action grid world with walls, one goal and a step limit."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import ConfigurationError, ContractViolation

UP, DOWN, LEFT, RIGHT = 0, 1, 2, 3
ACTION_NAMES = ("up", "down", "left", "right")
MOVES = ((0, -1), (0, 1), (-1, 0), (1, 0))
# x grows to the right, y grows downward (row index in the map file)
NEIGHBORS = ((-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1))
OBS_WIDTH = 10


@dataclass(frozen=True, eq=False)
class GridWorldSpec:
    width: int
    height: int
    walls: np.ndarray  # bool, shape (height, width)
    goal: tuple
    starts: tuple = ()
    max_steps: int = 500
    goal_reward: float = 5.0
    name: str = field(default="grid", compare=False)
    explicit_starts: bool = field(default=False, compare=False)

    def __post_init__(self):
        walls = np.asarray(self.walls, dtype=bool)
        if walls.shape != (self.height, self.width):
            raise ConfigurationError(
                f"wall mask shape {walls.shape} != ({self.height}, {self.width})")
        walls.setflags(write=False)
        object.__setattr__(self, "walls", walls)
        object.__setattr__(self, "goal", tuple(int(c) for c in self.goal))
        if not self.in_bounds(self.goal):
            raise ConfigurationError(f"goal {self.goal} outside the grid")
        if self.is_wall(self.goal):
            raise ConfigurationError(f"goal {self.goal} is a wall")
        if self.starts:
            object.__setattr__(self, "explicit_starts", True)
        starts = self.starts or tuple(
            (x, y) for y in range(self.height) for x in range(self.width)
            if not walls[y, x] and (x, y) != self.goal)
        starts = tuple(tuple(int(c) for c in s) for s in starts)
        for s in starts:
            if not self.in_bounds(s) or self.is_wall(s):
                raise ConfigurationError(f"start {s} is a wall or off-grid")
        if not starts:
            raise ConfigurationError("no start cells")
        object.__setattr__(self, "starts", starts)
        if self.max_steps < 1:
            raise ConfigurationError("max_steps must be >= 1")

    def in_bounds(self, cell):
        x, y = cell
        return 0 <= x < self.width and 0 <= y < self.height

    def is_wall(self, cell):
        x, y = cell
        return bool(self.walls[y, x])

    def with_goal(self, goal):
        """Same map with another goal.

        Explicit start cells are kept (minus the new goal); implicit ones
        are recomputed.
        """
        goal = tuple(int(c) for c in goal)
        if self.explicit_starts:
            return replace(self, goal=goal, starts=tuple(s for s in self.starts if s != goal))
        return replace(self, goal=goal, starts=())

    def free_cells(self):
        return [(x, y) for y in range(self.height) for x in range(self.width)
                if not self.walls[y, x]]


@dataclass(frozen=True)
class StepOutcome:
    observation: np.ndarray
    reward: float
    raw_reward: float
    done: bool
    step: int
    state: tuple = ()
    reached_goal: bool = False


def _move(spec, cell, action):
    dx, dy = MOVES[action]
    nxt = (cell[0] + dx, cell[1] + dy)
    if not spec.in_bounds(nxt) or spec.is_wall(nxt):
        return cell
    return nxt


def grid_observe(spec, cell):
    """(x, y) scaled to [0, 1] followed by eight neighbour wall flags."""
    x, y = cell
    obs = np.zeros(OBS_WIDTH)
    obs[0] = x / (spec.width - 1) if spec.width > 1 else 0.0
    obs[1] = y / (spec.height - 1) if spec.height > 1 else 0.0
    for i, (dx, dy) in enumerate(NEIGHBORS):
        n = (x + dx, y + dy)
        obs[2 + i] = 1.0 if (not spec.in_bounds(n) or spec.is_wall(n)) else 0.0
    return obs


def grid_step(spec, cell, action, step_index=0):
    """Pure transition from ``cell``; ``step_index`` is the number of steps taken so far."""
    cell = tuple(cell)
    if not spec.in_bounds(cell) or spec.is_wall(cell):
        raise ContractViolation(f"cell {cell} is off-grid or a wall")
    if action not in (0, 1, 2, 3):
        raise ContractViolation(f"unknown action {action!r}")
    nxt = _move(spec, cell, action)
    step = step_index + 1
    reached = nxt == spec.goal
    reward = spec.goal_reward if reached else 0.0
    done = reached or step >= spec.max_steps
    return StepOutcome(grid_observe(spec, nxt), reward, reward, done, step, nxt, reached)


def bfs_distances(spec):
    """Shortest number of moves from every free cell to the goal."""
    dist = {spec.goal: 0}
    queue = deque([spec.goal])
    while queue:
        cell = queue.popleft()
        for dx, dy in MOVES:
            prev = (cell[0] - dx, cell[1] - dy)
            if spec.in_bounds(prev) and not spec.is_wall(prev) and prev not in dist:
                if _move(spec, prev, MOVES.index((dx, dy))) == cell:
                    dist[prev] = dist[cell] + 1
                    queue.append(prev)
    return dist


def optimal_return(spec, cell, gamma):
    """Discounted return of a shortest path: goal_reward * gamma**(d-1)."""
    d = bfs_distances(spec).get(tuple(cell))
    if d is None or d == 0 or d > spec.max_steps:
        return 0.0
    return spec.goal_reward * gamma ** (d - 1)


class GridWorld:
    """Stateful episode wrapper with precomputed transition/observation tables."""

    action_space = ("discrete", 4)
    obs_width = OBS_WIDTH

    def __init__(self, spec):
        self.spec = spec
        cells = spec.free_cells()
        self._index = {c: i for i, c in enumerate(cells)}
        self._cells = cells
        self._obs = np.array([grid_observe(spec, c) for c in cells])
        self._next = np.array([[self._index[_move(spec, c, a)] for a in range(4)]
                               for c in cells], dtype=np.int64)
        self._goal = self._index[spec.goal]
        self._start_idx = np.array([self._index[s] for s in spec.starts], dtype=np.int64)
        self.cell = None
        self.t = 0

    @property
    def state(self):
        return self.cell

    def reset(self, rng, start=None):
        if start is None:
            start = self._cells[self._start_idx[rng.integers(len(self._start_idx))]]
        self.cell = tuple(start)
        self._ci = self._index[self.cell]
        self.t = 0
        return self._obs[self._ci]

    def observe(self, cell):
        return self._obs[self._index[tuple(cell)]]

    def step(self, action):
        ci = self._next[self._ci, action]
        self._ci = ci
        self.cell = self._cells[ci]
        self.t += 1
        reached = ci == self._goal
        reward = self.spec.goal_reward if reached else 0.0
        done = reached or self.t >= self.spec.max_steps
        return StepOutcome(self._obs[ci], reward, reward, done, self.t, self.cell, reached)

    def optimal_return(self, cell, gamma):
        return optimal_return(self.spec, cell, gamma)

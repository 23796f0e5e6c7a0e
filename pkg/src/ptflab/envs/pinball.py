"""Continuous-thrust pinball: a ball among polygon obstacles in the unit square.

Each action adds a thrust to the velocity, the ball is integrated over 20
sub-steps with elastic reflection off obstacle edges and the square's
boundary, then drag is applied.  Displacement per action at unit speed is
one ball radius, as in the classic domain.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .. import kernels
from ..errors import ConfigurationError, ContractViolation
from .grid import StepOutcome

SUBSTEPS = 20
BOUNDARY = ((0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0))


def _edges(polygon):
    n = len(polygon)
    return [(*polygon[i], *polygon[(i + 1) % n]) for i in range(n)]


def point_in_polygon(x, y, polygon):
    inside = False
    n = len(polygon)
    for i in range(n):
        x1, y1 = polygon[i]
        x2, y2 = polygon[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            xc = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if x < xc:
                inside = not inside
    return inside


def _polygon_area(polygon):
    n = len(polygon)
    return 0.5 * abs(sum(polygon[i][0] * polygon[(i + 1) % n][1]
                         - polygon[(i + 1) % n][0] * polygon[i][1] for i in range(n)))


@dataclass(frozen=True, eq=False)
class PinballSpec:
    obstacles: tuple
    ball_radius: float
    start: tuple
    target: tuple  # (x, y, radius)
    drag: float = 0.995
    max_steps: int = 500
    thrust_penalty: float = -5.0
    noop_penalty: float = -1.0
    terminal_reward: float = 10000.0
    reward_scale: float = 1e-4
    name: str = "pinball"

    def __post_init__(self):
        polys = tuple(tuple((float(x), float(y)) for x, y in p) for p in self.obstacles)
        object.__setattr__(self, "obstacles", polys)
        object.__setattr__(self, "start", tuple(float(c) for c in self.start))
        object.__setattr__(self, "target", tuple(float(c) for c in self.target))
        if not 0.0 < self.drag <= 1.0:
            raise ConfigurationError(f"drag {self.drag} outside (0, 1]")
        if self.ball_radius <= 0:
            raise ConfigurationError("ball radius must be positive")
        if self.max_steps < 1:
            raise ConfigurationError("max_steps must be >= 1")
        for p in polys:
            if len(p) < 3 or _polygon_area(p) <= 1e-12:
                raise ConfigurationError(f"degenerate polygon {p}")
            if any(not (0.0 <= c <= 1.0) for v in p for c in v):
                raise ConfigurationError("polygon vertex outside the unit square")
        for label, (x, y) in (("start", self.start), ("target", self.target[:2])):
            if not (0.0 < x < 1.0 and 0.0 < y < 1.0):
                raise ConfigurationError(f"{label} ({x}, {y}) outside the unit square")
            if any(point_in_polygon(x, y, p) for p in polys):
                raise ConfigurationError(f"{label} ({x}, {y}) inside an obstacle")
        if len(self.target) != 3 or self.target[2] <= 0:
            raise ConfigurationError("target needs x, y and a positive radius")
        edges = [e for p in (BOUNDARY,) + polys for e in _edges(p)]
        arr = np.ascontiguousarray(edges, dtype=np.float64)
        arr.setflags(write=False)
        object.__setattr__(self, "_edges", arr)

    @property
    def edges(self):
        return self._edges

    def with_target(self, target):
        return replace(self, target=tuple(target))


def pinball_observe(spec, state):
    x, y, vx, vy = state
    return np.array([x, y, vx, vy], dtype=np.float64)


def _clip1(v):
    return -1.0 if v < -1.0 else (1.0 if v > 1.0 else v)


def pinball_step(spec, state, action, step_index=0):
    """Pure transition; ``state`` is ``(x, y, vx, vy)``, ``action`` ``(ax, ay)``."""
    ax, ay = float(action[0]), float(action[1])
    if math.isnan(ax) or math.isnan(ay):
        raise ContractViolation("NaN in pinball action")
    ax, ay = _clip1(ax), _clip1(ay)
    x, y, vx, vy = (float(s) for s in state)
    vx = _clip1(vx + ax)
    vy = _clip1(vy + ay)
    tx, ty, tr = spec.target
    x, y, vx, vy, hit, _ = kernels.pinball_advance(
        x, y, vx, vy, spec.edges, spec.ball_radius, tx, ty, tr,
        SUBSTEPS, spec.ball_radius)
    vx *= spec.drag
    vy *= spec.drag
    step = step_index + 1
    if hit:
        raw = spec.terminal_reward
    elif ax == 0.0 and ay == 0.0:
        raw = spec.noop_penalty
    else:
        raw = spec.thrust_penalty
    new_state = (x, y, vx, vy)
    done = hit or step >= spec.max_steps
    return StepOutcome(pinball_observe(spec, new_state), raw * spec.reward_scale, raw,
                       done, step, new_state, hit)


class Pinball:
    action_space = ("continuous", 2)
    obs_width = 4

    def __init__(self, spec):
        self.spec = spec
        self.pos = None
        self.t = 0

    @property
    def state(self):
        return self.pos

    def reset(self, rng=None, start=None):
        x, y = start if start is not None else self.spec.start
        self.pos = (x, y, 0.0, 0.0)
        self.t = 0
        return pinball_observe(self.spec, self.pos)

    def observe(self, state):
        return pinball_observe(self.spec, state)

    def step(self, action):
        out = pinball_step(self.spec, self.pos, action, self.t)
        self.pos = out.state
        self.t = out.step
        return out

"""Text formats for grid maps and pinball layouts.

Grid::

    grid <width> <height> [max_steps=<n>] [goal_reward=<r>]
    <height rows of width characters: '#' wall, '.' free, 'G' goal, 'S' start>

Pinball (one directive per line, '#' starts a comment)::

    polygon x1 y1 x2 y2 x3 y3 ...
    ball radius=<r>
    start <x> <y>
    target <x> <y> <radius>
    drag <d>
    max_steps <n>
    reward_scale <s>
"""
from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError, ParseError
from .grid import GridWorld, GridWorldSpec
from .pinball import Pinball, PinballSpec

MAPS_DIR = Path(__file__).parent / "maps"
_DECIMAL = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")


def _num(tok, line, rule):
    if not _DECIMAL.match(tok):
        raise ParseError(line, rule, f"not a decimal number: {tok!r}")
    return float(tok)


def _int(tok, line, rule):
    if not re.fullmatch(r"\d+", tok):
        raise ParseError(line, rule, f"not a non-negative integer: {tok!r}")
    return int(tok)


def _parse_grid(lines, name):
    header = lines[0].split()
    if len(header) < 3:
        raise ParseError(1, "grid header", "expected 'grid <width> <height> ...'")
    width = _int(header[1], 1, "grid width")
    height = _int(header[2], 1, "grid height")
    if width < 1 or height < 1:
        raise ParseError(1, "grid dimensions", "width and height must be positive")
    opts = {"max_steps": 500, "goal_reward": 5.0}
    for tok in header[3:]:
        key, sep, val = tok.partition("=")
        if not sep or key not in opts:
            raise ParseError(1, "grid option", f"unknown option {tok!r}")
        opts[key] = _int(val, 1, key) if key == "max_steps" else _num(val, 1, key)
    rows = [ln.rstrip("\r") for ln in lines[1:]]
    while rows and not rows[-1].strip():
        rows.pop()
    if len(rows) != height:
        raise ParseError(len(rows) + 1, "row count", f"expected {height} rows, got {len(rows)}")
    walls = np.zeros((height, width), dtype=bool)
    goals, starts = [], []
    for y, row in enumerate(rows):
        lineno = y + 2
        if len(row) != width:
            raise ParseError(lineno, "row width", f"expected {width} cells, got {len(row)}")
        for x, ch in enumerate(row):
            if ch == "#":
                walls[y, x] = True
            elif ch == "G":
                goals.append((x, y, lineno))
            elif ch == "S":
                starts.append((x, y))
            elif ch != ".":
                raise ParseError(lineno, "cell character", f"unexpected {ch!r} at column {x + 1}")
    if len(goals) != 1:
        raise ParseError(0, "goal count", f"expected exactly one 'G', found {len(goals)}")
    try:
        return GridWorldSpec(width, height, walls, goals[0][:2], tuple(starts),
                             max_steps=opts["max_steps"], goal_reward=opts["goal_reward"],
                             name=name)
    except ConfigurationError as exc:
        raise ParseError(0, "grid invariant", str(exc)) from exc


def _parse_pinball(lines, name):
    fields = {"obstacles": []}
    for i, raw in enumerate(lines, start=1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        toks = text.split()
        key, args = toks[0], toks[1:]
        if key == "pinball":
            continue
        if key == "polygon":
            if len(args) < 6 or len(args) % 2:
                raise ParseError(i, "polygon", "needs at least 3 vertices as x y pairs")
            vals = [_num(a, i, "polygon") for a in args]
            if any(not 0.0 <= v <= 1.0 for v in vals):
                raise ParseError(i, "polygon", "coordinates must lie in [0, 1]")
            fields["obstacles"].append(tuple(zip(vals[0::2], vals[1::2])))
        elif key == "ball":
            if len(args) != 1 or not args[0].startswith("radius="):
                raise ParseError(i, "ball", "expected 'ball radius=<r>'")
            fields["ball_radius"] = _num(args[0][7:], i, "ball radius")
        elif key == "start":
            if len(args) != 2:
                raise ParseError(i, "start", "expected 'start <x> <y>'")
            fields["start"] = tuple(_num(a, i, "start") for a in args)
        elif key == "target":
            if len(args) != 3:
                raise ParseError(i, "target", "expected 'target <x> <y> <radius>'")
            fields["target"] = tuple(_num(a, i, "target") for a in args)
        elif key == "drag":
            if len(args) != 1:
                raise ParseError(i, "drag", "expected 'drag <d>'")
            fields["drag"] = _num(args[0], i, "drag")
        elif key == "max_steps":
            if len(args) != 1:
                raise ParseError(i, "max_steps", "expected 'max_steps <n>'")
            fields["max_steps"] = _int(args[0], i, "max_steps")
        elif key == "reward_scale":
            if len(args) != 1:
                raise ParseError(i, "reward_scale", "expected 'reward_scale <s>'")
            fields["reward_scale"] = _num(args[0], i, "reward_scale")
        else:
            raise ParseError(i, "directive", f"unknown directive {key!r}")
    for req in ("ball_radius", "start", "target"):
        if req not in fields:
            raise ParseError(0, "missing directive", req)
    fields["obstacles"] = tuple(fields["obstacles"])
    try:
        return PinballSpec(name=name, **fields)
    except ConfigurationError as exc:
        raise ParseError(0, "pinball invariant", str(exc)) from exc


def parse_env_config(text, name="env"):
    """Parse a grid map or a pinball layout into a validated spec."""
    lines = text.splitlines()
    first = next((ln for ln in lines if ln.strip()), "")
    if not first:
        raise ParseError(0, "empty file")
    if first.split()[0] == "grid":
        while lines and not lines[0].strip():
            lines.pop(0)
        return _parse_grid(lines, name)
    return _parse_pinball(lines, name)


def resolve_map(path):
    """Accept a filesystem path or the name of a bundled map."""
    p = Path(path)
    if p.exists():
        return p
    bundled = MAPS_DIR / p.name
    if bundled.exists():
        return bundled
    bundled = MAPS_DIR / f"{p.name}.txt"
    if bundled.exists():
        return bundled
    raise FileNotFoundError(f"no environment file {path!r}")


def load_env_spec(path):
    p = resolve_map(path)
    return parse_env_config(p.read_text(encoding="utf-8"), name=p.stem)


def make_env(spec):
    if isinstance(spec, GridWorldSpec):
        return GridWorld(spec)
    if isinstance(spec, PinballSpec):
        return Pinball(spec)
    raise ConfigurationError(f"unknown environment spec {type(spec).__name__}")

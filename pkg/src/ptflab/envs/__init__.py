"""Grid world and pinball simulators plus their file formats."""
from .config import load_env_spec, make_env, parse_env_config, resolve_map
from .grid import (GridWorld, GridWorldSpec, StepOutcome, bfs_distances,
                   grid_observe, grid_step, optimal_return)
from .pinball import Pinball, PinballSpec, pinball_observe, pinball_step

__all__ = [
    "GridWorld", "GridWorldSpec", "Pinball", "PinballSpec", "StepOutcome",
    "bfs_distances", "grid_observe", "grid_step", "load_env_spec", "make_env",
    "optimal_return", "parse_env_config", "pinball_observe", "pinball_step",
    "resolve_map",
]

"""Multi-seed transfer experiments on the bundled 12x12 four-room grids.

Every run is deterministic, so results are cached per process and shared
between the acceptance criteria that need the same run.
"""
import functools
import tempfile
import warnings
from pathlib import Path

import numpy as np

from ptflab.envs import load_env_spec, make_env
from ptflab.harness.config import ExperimentConfig
from ptflab.harness.curves import smooth
from ptflab.harness.runner import greedy_episode, load_sources, train_seed, \
    train_source_policies

SEEDS = tuple(range(20))
EPISODES = 5000
WINDOW = 100
SOURCE_GOALS = ((11, 1), (0, 0), (0, 11), (11, 11))   # (11, 1) sits next to the goal (10, 0)
ADJACENT = 0

_WORKDIR = Path(tempfile.mkdtemp(prefix="ptflab-acceptance-"))


def base_config(**kw):
    cfg = ExperimentConfig(env="rooms12", algorithm="a3c", seeds=SEEDS, episodes=EPISODES,
                           source_goals=SOURCE_GOALS, base_dir=str(_WORKDIR))
    return cfg.with_overrides(**kw)


@functools.lru_cache(maxsize=None)
def sources(imperfect=None):
    """Train the four source policies once; returns the manifest path."""
    name = "perfect" if imperfect is None else f"imperfect{imperfect:g}"
    out = _WORKDIR / name
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        results = train_source_policies(base_config(), out, imperfect)
    return out / "manifest.txt", tuple((r.status, r.episodes, r.score) for r in results)


@functools.lru_cache(maxsize=None)
def run(kind, seed):
    """One 5000-episode run.

    ``kind`` is one of ``a3c``, ``ptf``, ``a3c_far``, ``ptf_far``,
    ``ptf_imperfect``, ``ptf_fixed``.  Returns a dict with the per-episode
    discounted returns, the per-episode switch counts and, for PTF runs, the
    fraction of greedily visited states whose greedy option is the adjacent
    source.
    """
    env = "rooms12_far" if kind.endswith("_far") else "rooms12"
    if kind.startswith("a3c"):
        cfg = base_config(env=env)
    else:
        manifest, _ = sources(0.5 if kind == "ptf_imperfect" else None)
        cfg = base_config(env=env, algorithm="ptf-a3c", sources=str(manifest),
                          transfer="fixed:0.5" if kind == "ptf_fixed" else "adaptive")
    spec = load_env_spec(env)
    srcs = load_sources(cfg, spec) if cfg.is_ptf else None
    res = train_seed(cfg, seed, spec, srcs)
    out = {"returns": np.array([r.discounted_return for r in res.records]),
           "switches": np.array([r.switches for r in res.records], dtype=float)}
    if cfg.is_ptf:
        out["adjacent_share"] = adjacent_option_share(res.learner, spec)
    return out


def adjacent_option_share(learner, spec):
    """Share of cells on greedy rollouts (all starts) whose greedy option is the adjacent source."""
    env = make_env(spec)
    module = learner.option_module
    visited = set()
    for start in spec.starts:
        obs = env.reset(None, start)
        visited.add(env.state)
        for _ in range(200):
            out = env.step(learner.actor.greedy(obs))
            if out.done or out.state in visited:
                break
            visited.add(out.state)
            obs = out.observation
    hits = [module.greedy_option(env.observe(c)) == ADJACENT for c in visited]
    return float(np.mean(hits))


def auc(returns):
    return float(smooth(returns, WINDOW).sum())


def final_mean(returns, last=1000):
    return float(np.mean(returns[-last:]))


def quartile_switches(switches):
    q = len(switches) // 4
    return float(switches[:q].mean()), float(switches[-q:].mean())

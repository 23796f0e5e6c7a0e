"""Training runs, source-policy training and greedy evaluation."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..agents import A3CConfig, A3CLearner, PPOLearner, PpoConfig
from ..envs import GridWorldSpec, PinballSpec, load_env_spec, make_env, resolve_map
from ..errors import ConfigurationError
from ..options import EpsilonSchedule, OptionModule, SourcePolicy
from .metrics import MetricsRecord, write_metrics
from .policyfile import atomic_write, load_manifest, load_policy, save_policy


class TrainingDiverged(RuntimeError):
    """A loss or parameter became non-finite."""


# ------------------------------------------------------------------ setup

def env_spec_for(config):
    if not config.env:
        raise ConfigurationError("config has no env")
    p = config.path(config.env)
    return load_env_spec(p if p.exists() else resolve_map(config.env))


def load_sources(config, spec=None):
    """Frozen source policies from the manifest, checked against the environment."""
    spec = env_spec_for(config) if spec is None else spec
    env = make_env(spec)
    sources = []
    for p in load_manifest(config.path(config.sources)):
        pol = load_policy(p)
        if pol.obs_width != env.obs_width:
            raise ConfigurationError(
                f"source {p.name} expects observations of width {pol.obs_width}, "
                f"environment {spec.name} provides {env.obs_width}")
        if pol.action_space != env.action_space:
            raise ConfigurationError(
                f"source {p.name} acts in {pol.action_space}, environment {spec.name} "
                f"in {env.action_space}")
        sources.append(SourcePolicy(pol, p.name))
    return sources


def option_module_for(config, sources, obs_width, seed):
    rng = np.random.default_rng([seed, 0x0971])
    eps = EpsilonSchedule(config.epsilon_start, config.epsilon_end, config.epsilon_decrement)
    return OptionModule(sources, obs_width, rng, lr=config.option_lr, beta_lr=config.beta_lr,
                        xi=config.xi, batch_size=config.option_batch, gamma=config.gamma,
                        capacity=config.replay_capacity, target_sync=config.target_sync,
                        epsilon=eps, hidden=config.option_hidden,
                        epsilon_unit=config.epsilon_unit, sync_unit=config.sync_unit)


def make_learner(config, spec, seed, sources=None, on_episode=None):
    factory = lambda: make_env(spec)  # noqa: E731
    module = None
    schedule = config.schedule()
    if config.is_ptf:
        if sources is None:
            sources = load_sources(config, spec)
        module = option_module_for(config, sources, make_env(spec).obs_width, seed)
    else:
        schedule.mode = "off"
    if config.learner == "a3c":
        cfg = A3CConfig(gamma=config.gamma, lr=config.actor_lr, critic_lr=config.critic_lr,
                        entropy_coef=config.resolved_entropy, t_max=config.t_max,
                        workers=config.workers, hidden=tuple(config.hidden),
                        distill_samples=config.distill_samples)
        return A3CLearner(factory, cfg, seed, module, schedule, on_episode)
    cfg = PpoConfig(clip=config.ppo_clip, epochs=config.ppo_epochs,
                    minibatch=config.ppo_minibatch, entropy_coef=config.resolved_entropy,
                    gamma=config.gamma, lr=config.actor_lr, horizon=config.ppo_horizon,
                    hidden=tuple(config.hidden), option_every=config.ppo_option_every,
                    distill_samples=config.distill_samples)
    return PPOLearner(factory, cfg, seed, module, schedule, on_episode)


# --------------------------------------------------------------- training

@dataclass
class RunResult:
    seed: int
    records: list
    learner: object
    metrics_path: Path = None
    policy_path: Path = None


def train_seed(config, seed, spec=None, sources=None, episodes=None):
    """One training run; returns its metrics records and the learner."""
    spec = env_spec_for(config) if spec is None else spec
    records = []

    def on_episode(rec):
        records.append(MetricsRecord.from_episode(seed, rec))
        if not (np.isfinite(rec.discounted_return) and np.isfinite(rec.mean_weight)):
            raise TrainingDiverged(f"seed {seed} episode {rec.episode}: non-finite return")
        if not np.all(np.isfinite(learner.actor.params.flat)) or \
                not np.all(np.isfinite(learner.critic.params.flat)):
            raise TrainingDiverged(f"seed {seed} episode {rec.episode}: non-finite parameters")

    learner = make_learner(config, spec, seed, sources, on_episode)
    learner.run(config.episodes if episodes is None else episodes,
                deterministic=config.deterministic)
    return RunResult(seed, records, learner)


def metrics_header(config, seed):
    return ["ptflab metrics", f"run_seed = {seed}"] + config.describe()


def run_training(config, out_dir, seeds=None):
    """Train every seed; write ``metrics_seed<N>.csv`` and ``policy_seed<N>.ptfpol``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    spec = env_spec_for(config)
    sources = load_sources(config, spec) if config.is_ptf else None
    results = []
    for seed in (config.seeds if seeds is None else seeds):
        metrics_path = out / f"metrics_seed{seed}.csv"
        try:
            res = train_seed(config, seed, spec, sources)
        except TrainingDiverged as exc:
            write_metrics(metrics_path, [], metrics_header(config, seed) + [f"aborted: {exc}"])
            raise
        write_metrics(metrics_path, res.records, metrics_header(config, seed))
        res.metrics_path = metrics_path
        res.policy_path = out / f"policy_seed{seed}.ptfpol"
        save_policy(res.policy_path, res.learner.actor)
        results.append(res)
    return results


# ------------------------------------------------------------- evaluation

def greedy_episode(policy, env, gamma, start=None, rng=None):
    """Discounted return of one greedy episode.

    Grid episodes stop early (return 0) once a cell repeats, since a
    deterministic policy on a deterministic grid then loops until timeout.
    """
    obs = env.reset(rng, start)
    grid = isinstance(env.spec, GridWorldSpec)
    seen = {env.state}
    total, disc = 0.0, 1.0
    while True:
        out = env.step(policy.greedy(obs))
        total += disc * out.reward
        disc *= gamma
        if out.done:
            return total, out.reached_goal
        if grid:
            if out.state in seen:
                return total, False
            seen.add(out.state)
        obs = out.observation


def evaluate_policy(policy, spec, episodes, gamma=0.99, seed=0):
    """Mean and standard deviation of greedy discounted returns."""
    if episodes < 1:
        raise ConfigurationError("evaluation needs at least one episode")
    env = make_env(spec)
    if policy.obs_width != env.obs_width or policy.action_space != env.action_space:
        raise ConfigurationError(
            f"policy ({policy.obs_width} inputs, {policy.action_space}) does not fit "
            f"environment {spec.name} ({env.obs_width} inputs, {env.action_space})")
    rng = np.random.default_rng(seed)
    returns = np.array([greedy_episode(policy, env, gamma, rng=rng)[0]
                        for _ in range(episodes)])
    return float(returns.mean()), float(returns.std()), returns


def grid_greedy_ratio(policy, spec, gamma=0.99):
    """Greedy return summed over every start cell, over the optimal sum."""
    env = make_env(spec)
    got = sum(greedy_episode(policy, env, gamma, start=s)[0] for s in spec.starts)
    best = sum(env.optimal_return(s, gamma) for s in spec.starts)
    return got / best


# --------------------------------------------------------- source training

def source_spec(spec, goal):
    if isinstance(spec, GridWorldSpec):
        if len(goal) != 2:
            raise ConfigurationError(f"grid source goal needs x,y, got {goal}")
        return spec.with_goal((int(goal[0]), int(goal[1])))
    if isinstance(spec, PinballSpec):
        if len(goal) == 2:
            goal = (goal[0], goal[1], spec.target[2])
        if len(goal) != 3:
            raise ConfigurationError(f"pinball source target needs x,y[,r], got {goal}")
        return spec.with_target(tuple(float(g) for g in goal))
    raise ConfigurationError(f"unknown environment spec {type(spec).__name__}")


@dataclass
class SourceResult:
    goal: tuple
    policy: object
    episodes: int
    score: float
    status: str     # "ok", "imperfect" or "below-threshold"
    path: Path = None


def _success(rec, spec, gamma):
    if not rec.reached_goal:
        return False
    if isinstance(spec, GridWorldSpec):
        return rec.discounted_return >= 0.9 * make_env(spec).optimal_return(rec.start, gamma)
    return True


def _score(policy, spec, gamma):
    if isinstance(spec, GridWorldSpec):
        return grid_greedy_ratio(policy, spec, gamma)
    return float(greedy_episode(policy, make_env(spec), gamma)[1])


def train_source(config, spec, goal, seed, imperfect=None):
    """Train one source with A3C until its greedy score clears the threshold.

    Grid score: greedy return over all starts relative to the shortest-path
    optimum.  Pinball score: 1 if the greedy (mean-action) episode reaches
    the target, else 0.  With ``imperfect`` set, training stops as soon as
    the success rate over the last ``imperfect_window`` episodes reaches it.
    """
    sspec = source_spec(spec, goal)
    base = config.with_overrides(algorithm="a3c", sources="", transfer="off")
    window = []
    state = {"stop": False}

    def on_episode(rec):
        window.append(_success(rec, sspec, config.gamma))
        if len(window) > config.imperfect_window:
            window.pop(0)
        if imperfect is not None and len(window) == config.imperfect_window \
                and np.mean(window) >= imperfect:
            state["stop"] = True
            learner.request_stop()

    learner = make_learner(base, sspec, seed, None, on_episode)
    score = 0.0
    while learner.episodes < config.source_episodes and not state["stop"]:
        chunk = min(config.source_check_every, config.source_episodes - learner.episodes)
        learner.run(chunk, deterministic=True)
        if imperfect is None:
            score = _score(learner.actor, sspec, config.gamma)
            if score >= config.source_threshold:
                return SourceResult(goal, learner.actor, learner.episodes, score, "ok")
    if imperfect is not None:
        score = _score(learner.actor, sspec, config.gamma)
        status = "imperfect" if state["stop"] else "below-threshold"
        return SourceResult(goal, learner.actor, learner.episodes, score, status)
    return SourceResult(goal, learner.actor, learner.episodes, score, "below-threshold")


def train_source_policies(config, out_dir, imperfect=None):
    """One frozen policy per configured source goal, plus a manifest and report."""
    if not config.source_goals:
        raise ConfigurationError("config lists no source_goals")
    if imperfect is not None and not 0.0 < imperfect <= 1.0:
        raise ConfigurationError("imperfect success rate must lie in (0, 1]")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    spec = env_spec_for(config)
    results, names, report = [], [], ["file,goal,episodes,score,status"]
    for i, goal in enumerate(config.source_goals):
        res = train_source(config, spec, goal, config.source_seed + i, imperfect)
        res.path = out / f"source_{i}.ptfpol"
        save_policy(res.path, res.policy)
        if res.status == "below-threshold":
            warnings.warn(f"source {i} (goal {goal}) below threshold: score {res.score:.3f}",
                          stacklevel=2)
        names.append(res.path.name)
        report.append(f"{res.path.name},{'|'.join(f'{g:g}' for g in goal)},"
                      f"{res.episodes},{res.score!r},{res.status}")
        results.append(res)
    atomic_write(out / "manifest.txt", "\n".join(names) + "\n")
    atomic_write(out / "sources.csv", "\n".join(report) + "\n")
    return results

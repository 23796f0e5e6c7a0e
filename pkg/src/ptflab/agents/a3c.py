"""n-worker advantage actor-critic with an optional option module (PTF-A3C).

Deterministic mode steps the workers round-robin, one environment step each,
inside a single thread; a worker whose rollout ends (``t_max`` steps or a
terminal state) computes gradients on its parameter snapshot and applies
them to the global networks immediately.  Threaded mode runs one thread per
worker with the global update serialised by a lock.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

from ..nncore import AdamState
from ..transfer import TransferSchedule
from .losses import TransferTerm, a3c_gradients
from .policy import Critic, Policy, compute_returns, sample_action


@dataclass
class A3CConfig:
    gamma: float = 0.99
    lr: float = 3e-4
    critic_lr: float = 3e-4
    entropy_coef: float = 1e-4
    t_max: int = 20
    workers: int = 8
    hidden: tuple = (64, 64)
    distill_samples: int = 4


@dataclass
class EpisodeRecord:
    worker: int
    episode: int
    steps: int              # global environment steps when the episode ended
    discounted_return: float
    raw_return: float
    length: int
    option_hist: list = field(default_factory=list)
    switches: int = 0
    mean_weight: float = 0.0
    epsilon: float = 0.0
    reached_goal: bool = False
    start: tuple = ()


@dataclass
class Rollout:
    obs: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    rewards: list = field(default_factory=list)
    next_obs: list = field(default_factory=list)
    dones: list = field(default_factory=list)
    options: list = field(default_factory=list)
    weights: list = field(default_factory=list)
    bootstrap: float = 0.0

    def __len__(self):
        return len(self.rewards)


class _Worker:
    def __init__(self, wid, env, actor, critic, rng_act, rng_env, rng_opt):
        self.wid = wid
        self.env = env
        self.actor = actor
        self.critic = critic
        self.rng = rng_act
        self.rng_env = rng_env
        self.rng_opt = rng_opt
        self.rollout = Rollout()
        self.fresh = True
        self.obs = None
        self.option = -1
        self.beta_now = 0.0


class A3CLearner:
    """Global actor/critic, the workers, and (for PTF) the option module handle."""

    def __init__(self, env_factory, config=A3CConfig(), seed=0, option_module=None,
                 schedule=None, on_episode=None):
        self.config = config
        self.seed = seed
        self.option_module = option_module
        self.schedule = schedule if schedule is not None else TransferSchedule("off")
        self.on_episode = on_episode
        ss = np.random.SeedSequence(seed)
        init_ss, *worker_ss = ss.spawn(1 + config.workers)
        rng_init = np.random.default_rng(init_ss)
        probe = env_factory()
        self.obs_width = probe.obs_width
        self.action_space = probe.action_space
        self.actor = Policy.create(self.obs_width, self.action_space, rng_init, config.hidden)
        self.critic = Critic.create(self.obs_width, rng_init, config.hidden)
        self.actor_opt = AdamState(self.actor.params, config.lr)
        self.critic_opt = AdamState(self.critic.params, config.critic_lr)
        self.workers = []
        for w, wss in enumerate(worker_ss):
            a, e, o = wss.spawn(3)
            env = probe if w == 0 else env_factory()
            self.workers.append(_Worker(w, env, self.actor.copy(), self.critic.copy(),
                                        np.random.default_rng(a), np.random.default_rng(e),
                                        np.random.default_rng(o)))
        self.episodes = 0
        self.global_steps = 0
        self._stats = {}
        self._lock = threading.Lock()
        self._stop = False
        self.budget = 0

    # -------------------------------------------------------------- episodes
    def _start_episode(self, w):
        w.obs = w.env.reset(w.rng_env)
        n = self.option_module.n if self.option_module else 0
        self._stats[w.wid] = {"disc": 0.0, "raw": 0.0, "len": 0, "gpow": 1.0,
                              "hist": [0] * n, "switches": 0, "fsum": 0.0,
                              "start": w.env.state}
        if self.option_module is not None:
            q, beta = self.option_module.evaluate(w.obs)
            w.option = self.option_module.select(w.obs, w.rng_opt, q)
            w.beta_now = float(beta[w.option])

    def _end_episode(self, w, reached):
        st = self._stats[w.wid]
        eps = 0.0
        if self.option_module is not None:
            eps = self.option_module.epsilon
            self.option_module.end_episode()
        self.episodes += 1
        rec = EpisodeRecord(w.wid, self.episodes, self.global_steps, st["disc"], st["raw"],
                            st["len"], list(st["hist"]), st["switches"],
                            st["fsum"] / max(st["len"], 1), eps, bool(reached), st["start"])
        if self.on_episode is not None:
            self.on_episode(rec)
        if self.episodes >= self.budget:
            self._stop = True

    # ------------------------------------------------------------------ step
    def _tick(self, w):
        if w.fresh:
            w.actor.params.flat[:] = self.actor.params.flat
            w.critic.params.flat[:] = self.critic.params.flat
            w.fresh = False
            if w.obs is None:
                self._start_episode(w)
        cfg = self.config
        obs = w.obs
        a = sample_action(w.actor.dist(obs), w.rng)
        out = w.env.step(a)
        self.global_steps = self.schedule.tick()
        st = self._stats[w.wid]
        ro = w.rollout
        ro.obs.append(obs)
        ro.actions.append(a)
        ro.rewards.append(out.reward)
        ro.next_obs.append(out.observation)
        ro.dones.append(out.done)
        st["disc"] += st["gpow"] * out.reward
        st["gpow"] *= cfg.gamma
        st["raw"] += out.raw_reward
        st["len"] += 1
        module = self.option_module
        if module is not None:
            o = w.option
            f = self.schedule.weight(w.beta_now)
            ro.options.append(o)
            ro.weights.append(f)
            module.count_step()
            st["hist"][o] += 1
            st["fsum"] += f
            if not out.done:
                terminated, q2, beta2 = module.terminate_and_learn(out.observation, o, w.rng_opt)
                if terminated:
                    o_new = module.select(out.observation, w.rng_opt, q2)
                    if o_new != o:
                        st["switches"] += 1
                    w.option = o_new
                w.beta_now = float(beta2[w.option])
        w.obs = out.observation
        finished = None
        if out.done or len(ro) >= cfg.t_max:
            ro.bootstrap = 0.0 if out.done else w.critic.value(out.observation)
            self._learn(w)
            finished = ro
        if out.done:
            self._end_episode(w, out.reached_goal)
            w.obs = None
        return finished

    def _learn(self, w):
        cfg = self.config
        ro = w.rollout
        S = np.asarray(ro.obs)
        A = np.asarray(ro.actions)
        R = compute_returns(ro.rewards, cfg.gamma, ro.bootstrap)
        module = self.option_module
        transfer = None
        if module is not None:
            outputs = module.source_outputs(S)
            weights = np.asarray(ro.weights)
            targets = None
            if np.any(weights != 0.0):
                targets = module.distillation_targets(outputs, ro.options, w.rng_opt,
                                                      cfg.distill_samples)
            transfer = TransferTerm(targets, weights)
            module.store(S, A, ro.rewards, np.asarray(ro.next_obs), ro.dones, outputs)
        a3c_gradients(w.actor, w.critic, S, A, R, transfer, cfg.entropy_coef)
        with self._lock:
            self.actor.params.grad_flat[:] = w.actor.params.grad_flat
            self.critic.params.grad_flat[:] = w.critic.params.grad_flat
            self.actor_opt.step(self.actor.params)
            self.critic_opt.step(self.critic.params)
        w.actor.params.zero_grad()
        w.critic.params.zero_grad()
        if module is not None:
            module.update()
        w.rollout = Rollout()
        w.fresh = True

    def request_stop(self):
        """End the current :meth:`run` after the step in progress."""
        self._stop = True

    # ------------------------------------------------------------------- run
    def run(self, episodes, deterministic=True):
        """Train until ``episodes`` more episodes have finished (all workers)."""
        self.budget = self.episodes + episodes
        self._stop = self.episodes >= self.budget
        if deterministic:
            workers = self.workers
            while not self._stop:
                for w in workers:
                    self._tick(w)
                    if self._stop:
                        break
            return
        lock = threading.Lock()

        def loop(w):
            while not self._stop:
                with lock:
                    if self._stop:
                        break
                    self._tick(w)

        threads = [threading.Thread(target=loop, args=(w,)) for w in self.workers]
        for t in threads:
            t.start()
        for t in threads:
            t.join()


def worker_loop(learner, worker_index, t_max=None):
    """Run one worker until its current rollout ends and return the rollout.

    Its gradients have been applied to the global networks on return.
    """
    w = learner.workers[worker_index]
    if t_max is not None:
        learner.config.t_max = t_max
    learner.budget = max(learner.budget, learner.episodes + 1)
    learner._stop = False
    while True:
        rollout = learner._tick(w)
        if rollout is not None:
            return rollout

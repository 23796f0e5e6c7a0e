"""Clipped-surrogate PPO with the same transfer hook as the actor-critic.

One environment, batches of ``horizon`` steps, ``epochs`` passes of shuffled
minibatches.  Returns are plain discounted sums bootstrapped with the critic
at the batch boundary; advantages are ``R - V(s)`` at collection time.  In
PTF mode the option runs call-and-return during collection, the transfer
weight of every step is frozen when the step is taken, and the option values
are updated every ``option_every`` steps.
"""
from __future__ import annotations

import numpy as np

from ..nncore import AdamState, forward_batch
from ..transfer import TransferSchedule
from .a3c import EpisodeRecord
from .losses import PpoConfig, TransferTerm, _ActorHead, ppo_gradients
from .policy import Critic, Policy, compute_returns, sample_action


class PPOLearner:
    def __init__(self, env_factory, config=PpoConfig(), seed=0, option_module=None,
                 schedule=None, on_episode=None):
        self.config = config
        self.option_module = option_module
        self.schedule = schedule if schedule is not None else TransferSchedule("off")
        self.on_episode = on_episode
        init_ss, act_ss, env_ss, opt_ss, batch_ss = np.random.SeedSequence(seed).spawn(5)
        rng_init = np.random.default_rng(init_ss)
        self.env = env_factory()
        self.actor = Policy.create(self.env.obs_width, self.env.action_space, rng_init,
                                   config.hidden)
        self.critic = Critic.create(self.env.obs_width, rng_init, config.hidden)
        self.actor_opt = AdamState(self.actor.params, config.lr)
        self.critic_opt = AdamState(self.critic.params, config.lr)
        self.rng = np.random.default_rng(act_ss)
        self.rng_env = np.random.default_rng(env_ss)
        self.rng_opt = np.random.default_rng(opt_ss)
        self.rng_batch = np.random.default_rng(batch_ss)
        self.episodes = 0
        self.global_steps = 0
        self.obs = None
        self.option = -1
        self.beta_now = 0.0
        self.first_ratios = None
        self._stop = False

    def _start_episode(self):
        self.obs = self.env.reset(self.rng_env)
        n = self.option_module.n if self.option_module else 0
        self._st = {"disc": 0.0, "raw": 0.0, "len": 0, "gpow": 1.0, "hist": [0] * n,
                    "switches": 0, "fsum": 0.0, "start": self.env.state}
        if self.option_module is not None:
            q, beta = self.option_module.evaluate(self.obs)
            self.option = self.option_module.select(self.obs, self.rng_opt, q)
            self.beta_now = float(beta[self.option])

    def _end_episode(self, reached):
        st = self._st
        eps = 0.0
        if self.option_module is not None:
            eps = self.option_module.epsilon
            self.option_module.end_episode()
        self.episodes += 1
        if self.on_episode is not None:
            self.on_episode(EpisodeRecord(0, self.episodes, self.global_steps, st["disc"],
                                          st["raw"], st["len"], list(st["hist"]),
                                          st["switches"], st["fsum"] / max(st["len"], 1),
                                          eps, bool(reached), st["start"]))

    def _collect(self):
        """Up to ``horizon`` steps; stops early once ``budget`` episodes have ended."""
        cfg = self.config
        module = self.option_module
        S, A, rewards, S2, D, O, W, returns = [], [], [], [], [], [], [], []
        seg = 0  # start of the current episode segment inside the batch
        for _ in range(cfg.horizon):
            if self.obs is None:
                self._start_episode()
            obs = self.obs
            a = sample_action(self.actor.dist(obs), self.rng)
            out = self.env.step(a)
            self.global_steps = self.schedule.tick()
            st = self._st
            S.append(obs)
            A.append(a)
            rewards.append(out.reward)
            S2.append(out.observation)
            D.append(out.done)
            st["disc"] += st["gpow"] * out.reward
            st["gpow"] *= cfg.gamma
            st["raw"] += out.raw_reward
            st["len"] += 1
            if module is not None:
                o = self.option
                f = self.schedule.weight(self.beta_now)
                O.append(o)
                W.append(f)
                module.count_step()
                st["hist"][o] += 1
                st["fsum"] += f
                if not out.done:
                    terminated, q2, beta2 = module.terminate_and_learn(
                        out.observation, o, self.rng_opt)
                    if terminated:
                        o_new = module.select(out.observation, self.rng_opt, q2)
                        if o_new != o:
                            st["switches"] += 1
                        self.option = o_new
                    self.beta_now = float(beta2[self.option])
                if len(S) % cfg.option_every == 0:
                    lo = len(S) - cfg.option_every
                    module.store(np.asarray(S[lo:]), np.asarray(A[lo:]), rewards[lo:],
                                 np.asarray(S2[lo:]), D[lo:])
                    module.update()
            self.obs = out.observation
            if out.done:
                returns.extend(compute_returns(rewards[seg:], cfg.gamma, 0.0))
                seg = len(rewards)
                self._end_episode(out.reached_goal)
                self.obs = None
                if self.episodes >= self.budget or self._stop:
                    break
        if seg < len(rewards):
            boot = self.critic.value(self.obs)
            returns.extend(compute_returns(rewards[seg:], cfg.gamma, boot))
        if module is not None:
            lo = len(S) - len(S) % cfg.option_every
            if lo < len(S):
                module.store(np.asarray(S[lo:]), np.asarray(A[lo:]), rewards[lo:],
                             np.asarray(S2[lo:]), D[lo:])
                module.update()
        return (np.asarray(S), np.asarray(A), np.asarray(returns), O, np.asarray(W))

    def _optimize(self, S, A, R, O, W):
        cfg = self.config
        n = len(S)
        targets = None
        module = self.option_module
        if module is not None and np.any(W != 0.0):
            outputs = module.source_outputs(S)
            targets = module.distillation_targets(outputs, O, self.rng_opt, cfg.distill_samples)
        V = forward_batch(self.critic.spec, self.critic.params, S)[1][:, 0]
        adv = R - V
        perms = [self.rng_batch.permutation(n) for _ in range(cfg.epochs)]
        # Old log-probabilities are computed minibatch by minibatch along the
        # first epoch's order, exactly as the optimisation pass computes them.
        old = np.empty(n)
        for lo in range(0, n, cfg.minibatch):
            idx = perms[0][lo:lo + cfg.minibatch]
            old[idx] = _ActorHead(self.actor, S[idx]).logp(A[idx])
        weights = W if module is not None else np.zeros(n)
        losses = []
        for e, perm in enumerate(perms):
            for lo in range(0, n, cfg.minibatch):
                idx = perm[lo:lo + cfg.minibatch]
                term = TransferTerm(None if targets is None else targets[idx], weights[idx])
                loss, ratio = ppo_gradients(self.actor, self.critic, S[idx], A[idx], R[idx],
                                            adv[idx], old[idx], cfg, term)
                if e == 0 and lo == 0:
                    self.first_ratios = ratio
                self.actor_opt.step(self.actor.params)
                self.critic_opt.step(self.critic.params)
                losses.append(loss)
        return float(np.mean(losses))

    def request_stop(self):
        self._stop = True

    def run(self, episodes, deterministic=True):
        """Train until ``episodes`` more episodes have finished.

        PPO runs in a single thread of control, so ``deterministic`` has no
        further effect.
        """
        self.budget = self.episodes + episodes
        self._stop = False
        last = None
        while self.episodes < self.budget and not self._stop:
            batch = self._collect()
            if len(batch[0]):
                last = self._optimize(*batch)
        return last

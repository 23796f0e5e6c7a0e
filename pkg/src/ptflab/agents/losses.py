"""Actor-critic and PPO objectives with the weighted distillation term.

Each objective exists twice:

* ``*_gradients``: closed-form output-layer gradients pushed through the
  MLP kernels; used for training.
* ``*_loss_graph``: the same objective assembled from autograd primitives;
  used to cross-check the closed forms (and each other) against finite
  differences.

Signs follow gradient *descent*: the actor minimises
``-log pi(a|s) * (R - V) - rho * H(pi(s)) + f * L_H`` per step, summed over
the rollout; the critic minimises ``sum (R - V)^2``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ContractViolation
from ..nncore import backward_batch, forward_batch, mlp_apply
from ..nncore import functional as F
from ..nncore import tensor as T
from ..transfer import cross_entropy_grad_logits
from .policy import LOG_STD_MAX, LOG_STD_MIN


@dataclass
class TransferTerm:
    """Distillation targets and weights for each step of a batch.

    ``targets`` holds source probabilities ``(T, |A|)`` for discrete actors,
    or evaluation points ``(T, K+1, d)`` (source mean then source samples)
    for continuous ones.  ``weights`` is f(beta_o, t) per step.
    """
    targets: np.ndarray
    weights: np.ndarray

    @classmethod
    def none(cls, n):
        return cls(None, np.zeros(n))


@dataclass(frozen=True)
class PpoConfig:
    clip: float = 0.2
    epochs: int = 4
    minibatch: int = 64
    entropy_coef: float = 0.005
    gamma: float = 0.99
    lr: float = 3e-4
    value_coef: float = 1.0
    horizon: int = 512          # environment steps collected per batch
    hidden: tuple = (64, 64)
    option_every: int = 20      # option-value updates every this many steps (PTF)
    distill_samples: int = 4

    def __post_init__(self):
        if self.clip <= 0 or self.epochs < 1 or self.minibatch < 1 or self.horizon < 1:
            raise ContractViolation(
                "PPO needs clip > 0, epochs >= 1, minibatch >= 1, horizon >= 1")


def _check_lengths(n, *arrays):
    for a in arrays:
        if a is not None and len(a) != n:
            raise ContractViolation(f"batch length mismatch: {len(a)} vs {n}")


# ----------------------------------------------------------------- log probs

def _clamped_log_std(actor):
    raw = actor.raw_log_std
    return np.clip(raw, LOG_STD_MIN, LOG_STD_MAX), (raw >= LOG_STD_MIN) & (raw <= LOG_STD_MAX)


def log_probs(actor, obs, actions):
    """log pi(a_i | s_i) for a batch (kernel route)."""
    _, raw = forward_batch(actor.spec, actor.params, obs)
    if actor.discrete:
        return F.log_softmax_np(raw)[np.arange(len(obs)), np.asarray(actions, dtype=np.int64)]
    mean = np.tanh(raw)
    ls, _ = _clamped_log_std(actor)
    diff = np.asarray(actions) - mean
    return (-0.5 * diff * diff * np.exp(-2.0 * ls) - ls - F.HALF_LOG_2PI).sum(axis=1)


class _ActorHead:
    """Output-layer quantities and gradient helpers for one actor batch."""

    def __init__(self, actor, obs):
        self.actor = actor
        self.acts, raw = forward_batch(actor.spec, actor.params, obs)
        self.n = len(obs)
        if actor.discrete:
            self.logp_all = F.log_softmax_np(raw)
            self.p = np.exp(self.logp_all)
            self.d_raw = np.zeros_like(raw)
        else:
            self.mean = np.tanh(raw)
            self.ls, self.ls_mask = _clamped_log_std(actor)
            self.inv_var = np.exp(-2.0 * self.ls)
            self.d_mean = np.zeros_like(raw)
            self.d_ls = np.zeros_like(self.ls)

    def logp(self, actions):
        if self.actor.discrete:
            return self.logp_all[np.arange(self.n), actions]
        diff = actions - self.mean
        return (-0.5 * diff * diff * self.inv_var - self.ls - F.HALF_LOG_2PI).sum(axis=1)

    def entropy(self):
        if self.actor.discrete:
            return -(self.p * self.logp_all).sum(axis=1)
        return np.full(self.n, (self.ls + F.HALF_LOG_2PIE).sum())

    def add_logp(self, actions, coef):
        """Accumulate coef_i * d log pi(a_i|s_i)."""
        if self.actor.discrete:
            g = -self.p * coef[:, None]
            g[np.arange(self.n), actions] += coef
            self.d_raw += g
        else:
            diff = actions - self.mean
            self.d_mean += coef[:, None] * diff * self.inv_var
            self.d_ls += (coef[:, None] * (diff * diff * self.inv_var - 1.0)).sum(axis=0)

    def add_entropy(self, coef):
        """Accumulate coef_i * dH(pi(s_i))."""
        if self.actor.discrete:
            H = -(self.p * self.logp_all).sum(axis=1, keepdims=True)
            self.d_raw += -coef[:, None] * self.p * (self.logp_all + H)
        else:
            self.d_ls += coef.sum()

    def add_distillation(self, targets, coef):
        """Accumulate coef_i * dL_H(s_i); returns per-row L_H."""
        if self.actor.discrete:
            loss, g = cross_entropy_grad_logits(targets, self.p)
            self.d_raw += coef[:, None] * g
            return loss
        diff = targets - self.mean[:, None, :]                      # (T, K+1, d)
        iv = self.inv_var
        loss = (0.5 * diff * diff * iv + self.ls + F.HALF_LOG_2PI).sum(axis=2).mean(axis=1)
        self.d_mean += coef[:, None] * -(diff * iv).mean(axis=1)
        self.d_ls += (coef[:, None] * (1.0 - diff * diff * iv).mean(axis=1)).sum(axis=0)
        return loss

    def backward(self):
        actor = self.actor
        if actor.discrete:
            d_raw = self.d_raw
        else:
            d_raw = self.d_mean * (1.0 - self.mean * self.mean)
            lo = actor.params.offset("log_std")
            actor.params.grad_flat[lo:lo + self.d_ls.size] += self.d_ls * self.ls_mask
        backward_batch(actor.spec, actor.params, self.acts, d_raw)


# ----------------------------------------------------------------------- A3C

def a3c_gradients(actor, critic, obs, actions, returns, transfer=None, rho=1e-4):
    """Accumulate the three-term actor gradient and the critic gradient.

    Returns a dict with the summed loss components.
    """
    obs = np.asarray(obs, dtype=np.float64)
    n = len(obs)
    returns = np.asarray(returns, dtype=np.float64)
    actions = np.asarray(actions) if not actor.discrete else np.asarray(actions, dtype=np.int64)
    transfer = transfer if transfer is not None else TransferTerm.none(n)
    _check_lengths(n, actions, returns, transfer.weights, transfer.targets)

    c_acts, v_raw = forward_batch(critic.spec, critic.params, obs)
    v = v_raw[:, 0]
    adv = returns - v
    backward_batch(critic.spec, critic.params, c_acts, (-2.0 * adv)[:, None])

    head = _ActorHead(actor, obs)
    logp = head.logp(actions)
    ent = head.entropy()
    head.add_logp(actions, -adv)
    if rho:
        head.add_entropy(np.full(n, -rho))
    f = np.asarray(transfer.weights, dtype=np.float64)
    distill = np.zeros(n)
    if np.any(f != 0.0):
        distill = head.add_distillation(transfer.targets, f)
    head.backward()
    return {
        "actor_loss": float(np.sum(-logp * adv - rho * ent + f * distill)),
        "critic_loss": float(np.sum(adv * adv)),
        "entropy": float(ent.mean()) if n else 0.0,
        "distill": float(np.sum(f * distill)),
    }


def _actor_graph(actor, obs):
    """Per-row autograd pieces: (log-prob fn, entropy, distillation fn)."""
    if actor.discrete:
        (p,) = mlp_apply(actor.spec, actor.params, obs)

        def logp(actions):
            onehot = np.eye(actor.action_space[1])[np.asarray(actions, dtype=np.int64)]
            return T.sum(T.mul(T.log(p), onehot), axis=-1)

        def distill(targets):
            return F.cross_entropy(targets, p)

        return logp, F.entropy(p), distill

    (mean,) = mlp_apply(actor.spec, actor.params, obs)
    ls = T.clip(actor.params.leaf("log_std"), LOG_STD_MIN, LOG_STD_MAX)

    def logp(actions):
        return F.gaussian_log_prob(mean, ls, actions)

    def distill(targets):
        total = None
        k = targets.shape[1]
        for j in range(k):
            lp = F.gaussian_log_prob(mean, ls, targets[:, j, :])
            total = lp if total is None else T.add(total, lp)
        return T.mul(total, -1.0 / k)

    ent = T.mul(F.gaussian_entropy(ls), np.ones(len(obs)))
    return logp, ent, distill


def a3c_loss_graph(actor, critic, obs, actions, returns, transfer=None, rho=1e-4):
    """Autograd version of :func:`a3c_gradients`: (actor_loss, critic_loss)."""
    obs = np.asarray(obs, dtype=np.float64)
    n = len(obs)
    transfer = transfer if transfer is not None else TransferTerm.none(n)
    (v,) = mlp_apply(critic.spec, critic.params, obs)
    v = T.sum(v, axis=-1)
    err = T.add(np.asarray(returns, dtype=np.float64), T.neg(v))
    critic_loss = T.sum(T.square(err))
    adv = np.asarray(returns, dtype=np.float64) - v.data

    logp, ent, distill = _actor_graph(actor, obs)
    per_row = T.add(T.mul(logp(actions), -adv), T.mul(ent, -rho))
    f = np.asarray(transfer.weights, dtype=np.float64)
    if np.any(f != 0.0):
        per_row = T.add(per_row, T.mul(distill(transfer.targets), f))
    return T.sum(per_row), critic_loss


# ----------------------------------------------------------------------- PPO

def _surrogate_coef(logp_new, logp_old, adv, clip):
    """d(-min(r A, clip(r) A))/d logp_new per row, plus the surrogate itself."""
    ratio = np.exp(logp_new - logp_old)
    clipped = np.clip(ratio, 1.0 - clip, 1.0 + clip)
    a, b = ratio * adv, clipped * adv
    take_a = a <= b
    inside = (ratio >= 1.0 - clip) & (ratio <= 1.0 + clip)
    d = np.where(take_a, -adv * ratio, -adv * ratio * inside)
    return d, np.minimum(a, b), ratio


def ppo_gradients(actor, critic, obs, actions, returns, advantages, old_logp,
                  config=PpoConfig(), transfer=None):
    """Accumulate gradients of the PTF-PPO minibatch loss; returns its value.

    loss = -mean(min(r A, clip(r, 1 +- eps) A)) + c_v mean((R - V)^2)
           - c_H mean(H) + mean(f L_H)
    """
    obs = np.asarray(obs, dtype=np.float64)
    n = len(obs)
    actions = np.asarray(actions) if not actor.discrete else np.asarray(actions, dtype=np.int64)
    transfer = transfer if transfer is not None else TransferTerm.none(n)
    _check_lengths(n, actions, returns, advantages, old_logp, transfer.weights)
    adv = np.asarray(advantages, dtype=np.float64)

    c_acts, v_raw = forward_batch(critic.spec, critic.params, obs)
    err = np.asarray(returns, dtype=np.float64) - v_raw[:, 0]
    backward_batch(critic.spec, critic.params, c_acts,
                   (-2.0 * config.value_coef / n * err)[:, None])

    head = _ActorHead(actor, obs)
    logp = head.logp(actions)
    d_logp, surr, ratio = _surrogate_coef(logp, np.asarray(old_logp, dtype=np.float64),
                                          adv, config.clip)
    head.add_logp(actions, d_logp / n)
    ent = head.entropy()
    head.add_entropy(np.full(n, -config.entropy_coef / n))
    f = np.asarray(transfer.weights, dtype=np.float64)
    distill = np.zeros(n)
    if np.any(f != 0.0):
        distill = head.add_distillation(transfer.targets, f / n)
    head.backward()
    loss = (-surr.mean() + config.value_coef * (err * err).mean()
            - config.entropy_coef * ent.mean() + (f * distill).mean())
    return float(loss), ratio


def ppo_loss(actor, critic, obs, actions, returns, advantages, old_logp,
             config=PpoConfig(), transfer=None):
    """Scalar PTF-PPO loss (no gradient side effects)."""
    return float(ppo_loss_graph(actor, critic, obs, actions, returns, advantages,
                                old_logp, config, transfer).data)


def ppo_loss_graph(actor, critic, obs, actions, returns, advantages, old_logp,
                   config=PpoConfig(), transfer=None):
    obs = np.asarray(obs, dtype=np.float64)
    n = len(obs)
    transfer = transfer if transfer is not None else TransferTerm.none(n)
    adv = np.asarray(advantages, dtype=np.float64)
    (v,) = mlp_apply(critic.spec, critic.params, obs)
    err = T.add(np.asarray(returns, dtype=np.float64), T.neg(T.sum(v, axis=-1)))
    value_loss = T.mul(T.mean(T.square(err)), config.value_coef)

    logp, ent, distill = _actor_graph(actor, obs)
    ratio = T.exp(T.add(logp(actions), -np.asarray(old_logp, dtype=np.float64)))
    surr = T.minimum(T.mul(ratio, adv),
                     T.mul(T.clip(ratio, 1.0 - config.clip, 1.0 + config.clip), adv))
    loss = T.add(T.neg(T.mean(surr)), value_loss)
    loss = T.add(loss, T.mul(T.mean(ent), -config.entropy_coef))
    f = np.asarray(transfer.weights, dtype=np.float64)
    if np.any(f != 0.0):
        loss = T.add(loss, T.mean(T.mul(distill(transfer.targets), f)))
    return loss

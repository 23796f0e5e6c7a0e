"""Option module: frozen source policies as options, option values and terminations.

One MLP trunk (2 x 32 tanh) feeds two heads: ``n`` option values and ``n``
sigmoid termination probabilities.  The option values (trunk + value head)
are learned off-policy from the replay buffer; the termination head is moved
by a plain gradient step on ``beta * (A + xi)`` with the option advantage
``A = Q(s', o) - max Q(s', .)`` held fixed.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, ContractViolation
from ..nncore import AdamState, MlpSpec, backward_batch, forward_batch, init_params
from ..nncore.mlp import forward_raw
from .. import kernels
from .buffer import ReplayBuffer

CONFIDENCE_Z = 1.96
UNITS = ("episode", "step")
SIGMA_FLOOR = 1e-3


@dataclass(frozen=True)
class EpsilonSchedule:
    start: float = 1.0
    end: float = 0.05
    decrement: float = 1e-3

    def value(self, k):
        return max(self.end, self.start - k * self.decrement)


class SourcePolicy:
    """A frozen actor reused as an intra-option policy."""

    def __init__(self, policy, name=""):
        self.policy = policy
        self.name = name
        policy.params.flat.setflags(write=False)

    @property
    def action_space(self):
        return self.policy.action_space

    @property
    def obs_width(self):
        return self.policy.obs_width

    def dist(self, obs):
        return self.policy.dist(obs)

    def dist_batch(self, S):
        return self.policy.dist_batch(S)[1]


def source_selects(output, action):
    """Whether a source policy output 'selects' ``action``.

    Discrete: ``action`` is a most-probable action.  Continuous: every
    component lies within the 95% central interval of the source Gaussian
    (std floored at 1e-3).
    """
    if isinstance(output, tuple):
        mean, log_std = output
        sigma = np.maximum(np.exp(log_std), SIGMA_FLOOR)
        return bool(np.all(np.abs(np.asarray(action) - mean) <= CONFIDENCE_Z * sigma))
    probs = np.asarray(output)
    return bool(probs[int(action)] >= probs.max())


def selects_batch(output, actions):
    if isinstance(output, tuple):
        mean, log_std = output
        sigma = np.maximum(np.exp(log_std), SIGMA_FLOOR)
        return np.all(np.abs(np.asarray(actions) - mean) <= CONFIDENCE_Z * sigma, axis=1)
    probs = np.asarray(output)
    idx = np.asarray(actions, dtype=np.int64)
    return probs[np.arange(len(idx)), idx] >= probs.max(axis=1)


class OptionNets:
    def __init__(self, obs_width, n_options, rng, hidden=(32, 32)):
        if n_options < 1:
            raise ConfigurationError("need at least one option")
        self.n = int(n_options)
        self.spec = MlpSpec(obs_width, tuple(hidden),
                            ((self.n, "linear"), (self.n, "sigmoid")))
        self.params = init_params(self.spec, rng)
        self.target_flat = self.params.flat.copy()
        last = self.spec.n_layers - 1
        self._W_last = self.params.value(f"W{last}")
        self._b_last = self.params.value(f"b{last}")
        self._hidden = np.zeros(self.spec.hidden[-1])

    def evaluate(self, s):
        """(Q(s, .), beta(s, .)) from the live parameters."""
        raw = kernels.mlp_forward(self.params.flat, self.spec.dims,
                                  np.ascontiguousarray(s, dtype=np.float64), self._hidden)
        n = self.n
        return raw[:n], 1.0 / (1.0 + np.exp(-raw[n:]))

    def q(self, s):
        return self.evaluate(s)[0]

    def beta(self, s):
        return self.evaluate(s)[1]

    def target_q(self, s):
        raw = kernels.mlp_forward(self.target_flat, self.spec.dims,
                                  np.ascontiguousarray(s, dtype=np.float64))
        return raw[:self.n]

    def target_q_batch(self, S):
        return kernels.mlp_forward_batch(self.target_flat, self.spec.dims, S)[-1][:, :self.n]

    def beta_param_slices(self):
        """Flat indices of the termination head (its weight columns and biases)."""
        last = self.spec.n_layers - 1
        W_off = self.params.offset(f"W{last}")
        fan_in, width = self.params.shape(f"W{last}")
        cols = np.arange(self.n, 2 * self.n)
        w_idx = (W_off + np.arange(fan_in)[:, None] * width + cols[None, :]).ravel()
        b_idx = self.params.offset(f"b{last}") + cols
        return np.concatenate([w_idx, b_idx])

    def sync_target(self):
        self.target_flat[:] = self.params.flat


def select_option(nets, s, epsilon, rng, q=None):
    """Epsilon-greedy over option values; exact ties broken uniformly."""
    u = rng.random()
    if u < epsilon:
        return int(rng.integers(nets.n))
    q = nets.q(s) if q is None else q
    best = np.flatnonzero(q == q.max())
    if len(best) == 1:
        return int(best[0])
    return int(best[rng.integers(len(best))])


def sample_termination(nets, s, o, rng, beta=None):
    """True when the option terminates at ``s`` (Bernoulli(beta(s, o)))."""
    if not 0 <= o < nets.n:
        raise ContractViolation(f"option {o} out of range")
    b = nets.beta(s)[o] if beta is None else beta[o]
    return bool(rng.random() < b)


def option_value_upon_arrival(nets, s_next, o):
    """U(s', o) = (1 - beta) Q'(s', o) + beta max Q'(s', .)."""
    q_t = nets.target_q(s_next)
    b = nets.beta(s_next)[o]
    return float((1.0 - b) * q_t[o] + b * q_t.max())


def termination_step(nets, s_next, o, lr=1e-3, xi=1e-3):
    """theta_beta <- theta_beta - lr * dbeta(s', o)/dtheta_beta * (A(s', o) + xi).

    Only the termination head moves.  Returns ``(advantage, beta_before)``.
    """
    q, beta = nets.evaluate(s_next)
    adv = float(q[o] - q.max())
    b = float(beta[o])
    scale = lr * (adv + xi) * b * (1.0 - b)
    col = nets.n + o
    if scale != 0.0:
        nets._W_last[:, col] -= scale * nets._hidden
        nets._b_last[col] -= scale
    return adv, b


def update_option_values(nets, buffer, optimizer, batch_size=32, gamma=0.99, rng=None):
    """One regression step of the option values toward r + gamma U(s', o).

    Only (transition, option) pairs whose source selects the stored action
    contribute.  Returns the loss, or ``None`` when the buffer is too small.
    """
    if len(buffer) < batch_size:
        return None
    idx = buffer.sample_indices(batch_size, rng)
    S, S2 = buffer.obs[idx], buffer.next_obs[idx]
    r, done, mask = buffer.rewards[idx], buffer.dones[idx], buffer.masks[idx]
    if not mask.any():
        return 0.0
    n = nets.n
    acts, raw = forward_batch(nets.spec, nets.params, S)
    q = raw[:, :n]
    raw2 = kernels.mlp_forward_batch(nets.params.flat, nets.spec.dims, S2)[-1]
    beta2 = 1.0 / (1.0 + np.exp(-raw2[:, n:]))
    q_t = nets.target_q_batch(S2)
    U = (1.0 - beta2) * q_t + beta2 * q_t.max(axis=1, keepdims=True)
    y = r[:, None] + gamma * np.where(done[:, None], 0.0, U)
    err = np.where(mask, y - q, 0.0)
    loss = float((err * err).sum() / batch_size)
    d_raw = np.zeros_like(raw)
    d_raw[:, :n] = -2.0 * err / batch_size
    backward_batch(nets.spec, nets.params, acts, d_raw)
    optimizer.step(nets.params)
    return loss


class OptionModule:
    """Shared option service used by every worker of a PTF run.

    Holds the option networks, the frozen sources, the replay buffer and the
    exploration schedule.  Mutations are serialised by an internal lock.
    """

    def __init__(self, sources, obs_width, rng, *, lr=1e-3, beta_lr=None, xi=1e-3,
                 batch_size=32, gamma=0.99, capacity=100_000, target_sync=1000,
                 epsilon=EpsilonSchedule(), hidden=(32, 32), epsilon_unit="episode",
                 sync_unit="episode"):
        if not sources:
            raise ConfigurationError("option module needs at least one source policy")
        spaces = {s.action_space for s in sources}
        if len(spaces) != 1:
            raise ConfigurationError("source policies disagree on the action space")
        for s in sources:
            if s.obs_width != obs_width:
                raise ConfigurationError(
                    f"source {s.name!r} expects observations of width {s.obs_width}, "
                    f"environment provides {obs_width}")
        self.sources = list(sources)
        self.action_space = sources[0].action_space
        self.nets = OptionNets(obs_width, len(sources), rng, hidden)
        self.optimizer = AdamState(self.nets.params, lr)
        self.beta_lr = lr if beta_lr is None else beta_lr
        self.xi = xi
        self.batch_size = batch_size
        self.gamma = gamma
        self.target_sync = target_sync
        self.epsilon_schedule = epsilon
        kind, dim = self.action_space
        self.buffer = ReplayBuffer(capacity, obs_width,
                                   None if kind == "discrete" else dim, len(sources))
        for unit in (epsilon_unit, sync_unit):
            if unit not in UNITS:
                raise ConfigurationError(f"schedule unit must be one of {UNITS}, got {unit!r}")
        self.epsilon_unit = epsilon_unit
        self.sync_unit = sync_unit
        self.rng = rng
        self.steps = 0
        self.episodes = 0
        self.syncs = 0
        self.updates = 0
        self._lock = threading.RLock()

    @property
    def n(self):
        return self.nets.n

    @property
    def epsilon(self):
        k = self.episodes if self.epsilon_unit == "episode" else self.steps
        return self.epsilon_schedule.value(k)

    def evaluate(self, s):
        return self.nets.evaluate(s)

    def select(self, s, rng, q=None):
        return select_option(self.nets, s, self.epsilon, rng, q)

    def terminate_and_learn(self, s_next, o, rng):
        """Termination draw at ``s'`` followed by one termination update.

        Returns ``(terminated, q(s'), beta(s'))`` evaluated before the update.
        """
        with self._lock:
            q, beta = self.nets.evaluate(s_next)
            q, beta = q.copy(), beta.copy()
            terminated = bool(rng.random() < beta[o])
            termination_step(self.nets, s_next, o, self.beta_lr, self.xi)
        return terminated, q, beta

    def source_outputs(self, S):
        return [src.dist_batch(S) for src in self.sources]

    def store(self, S, A, R, S2, D, outputs=None):
        outputs = self.source_outputs(S) if outputs is None else outputs
        masks = np.stack([selects_batch(out, A) for out in outputs], axis=1)
        with self._lock:
            self.buffer.add_batch(S, A, R, S2, D, masks)

    def update(self):
        with self._lock:
            loss = update_option_values(self.nets, self.buffer, self.optimizer,
                                        self.batch_size, self.gamma, self.rng)
            if loss is not None:
                self.updates += 1
            return loss

    def count_step(self):
        """Called once per environment step by the learner."""
        with self._lock:
            self.steps += 1
            if self.sync_unit == "step":
                self._maybe_sync(self.steps)

    def end_episode(self):
        with self._lock:
            self.episodes += 1
            if self.sync_unit == "episode":
                self._maybe_sync(self.episodes)

    def _maybe_sync(self, count):
        if self.target_sync and count % self.target_sync == 0:
            self.nets.sync_target()
            self.syncs += 1

    def distillation_targets(self, outputs, options, rng, k=4):
        """Per-step targets for the active option's source.

        Discrete: the source's probabilities.  Continuous: the source mean
        followed by ``k`` source samples.
        """
        options = np.asarray(options, dtype=np.int64)
        if self.action_space[0] == "discrete":
            stacked = np.stack(outputs, axis=0)          # (n, T, A)
            return stacked[options, np.arange(len(options))]
        means = np.stack([o[0] for o in outputs], axis=0)    # (n, T, d)
        stds = np.stack([np.exp(o[1]) for o in outputs], axis=0)  # (n, d)
        mu = means[options, np.arange(len(options))]          # (T, d)
        sd = stds[options][:, None, :]
        draws = mu[:, None, :] + sd * rng.standard_normal((len(options), k, mu.shape[1]))
        return np.concatenate([mu[:, None, :], draws], axis=1)

    def greedy_option(self, s):
        q = self.nets.q(s)
        return int(np.argmax(q))

"""Actor and critic networks plus action sampling."""
from __future__ import annotations

import numpy as np

from ..errors import ConfigurationError
from ..nncore import MlpSpec, forward_batch, forward_raw, init_params
from ..nncore.functional import softmax_np

LOG_STD_MIN, LOG_STD_MAX = -5.0, 1.0


class Policy:
    """Discrete (softmax head) or continuous (tanh mean + free log-std) actor.

    The same class holds frozen source policies and the learner's actor.
    """

    def __init__(self, spec, params, action_space):
        kind, dim = action_space
        if kind not in ("discrete", "continuous"):
            raise ConfigurationError(f"unknown action space {kind!r}")
        expected = "softmax" if kind == "discrete" else "tanh"
        if len(spec.heads) != 1 or spec.heads[0].activation != expected \
                or spec.heads[0].width != dim:
            raise ConfigurationError(f"{kind} policy needs one {expected} head of width {dim}")
        if kind == "continuous" and "log_std" not in params:
            raise ConfigurationError("continuous policy needs a log_std parameter")
        self.spec = spec
        self.params = params
        self.action_space = (kind, int(dim))
        self.discrete = kind == "discrete"

    @classmethod
    def create(cls, obs_width, action_space, rng, hidden=(64, 64)):
        kind, dim = action_space
        act = "softmax" if kind == "discrete" else "tanh"
        spec = MlpSpec(obs_width, tuple(hidden), ((dim, act),))
        extra = {"log_std": (dim,)} if kind == "continuous" else None
        return cls(spec, init_params(spec, rng, extra), action_space)

    @property
    def obs_width(self):
        return self.spec.input_width

    @property
    def raw_log_std(self):
        return self.params.value("log_std")

    @property
    def log_std(self):
        return np.clip(self.params.value("log_std"), LOG_STD_MIN, LOG_STD_MAX)

    def dist(self, obs):
        """Probabilities (discrete) or ``(mean, log_std)`` for one observation."""
        raw = forward_raw(self.spec, self.params, obs)
        if self.discrete:
            return softmax_np(raw)
        return np.tanh(raw), self.log_std

    def dist_batch(self, S):
        acts, raw = forward_batch(self.spec, self.params, S)
        if self.discrete:
            return acts, softmax_np(raw)
        return acts, (np.tanh(raw), self.log_std)

    def greedy(self, obs):
        d = self.dist(obs)
        if self.discrete:
            return int(np.argmax(d))
        return d[0]

    def copy(self):
        return Policy(self.spec, self.params.copy(), self.action_space)


class Critic:
    def __init__(self, spec, params):
        if spec.out_width != 1:
            raise ConfigurationError("critic output width must be 1")
        self.spec = spec
        self.params = params

    @classmethod
    def create(cls, obs_width, rng, hidden=(64, 64)):
        spec = MlpSpec(obs_width, tuple(hidden), ((1, "linear"),))
        return cls(spec, init_params(spec, rng))

    def value(self, obs):
        return float(forward_raw(self.spec, self.params, obs)[0])

    def copy(self):
        return Critic(self.spec, self.params.copy())


def sample_action(output, rng):
    """Draw from a policy output as returned by :meth:`Policy.dist`."""
    if isinstance(output, tuple):
        mean, log_std = output
        a = mean + np.exp(log_std) * rng.standard_normal(np.shape(mean))
        return np.clip(a, -1.0, 1.0)
    cdf = np.cumsum(output)
    idx = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return min(idx, len(output) - 1)


def compute_returns(rewards, gamma, bootstrap=0.0):
    """Backward recursion R <- r_i + gamma R seeded with ``bootstrap``."""
    out = np.empty(len(rewards))
    R = float(bootstrap)
    for i in range(len(rewards) - 1, -1, -1):
        R = rewards[i] + gamma * R
        out[i] = R
    return out

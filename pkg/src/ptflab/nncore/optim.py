from __future__ import annotations

import numpy as np

from .. import kernels
from ..errors import ConfigurationError


class AdamState:
    """Adam moments for one ParameterStore (flat buffers mirroring it)."""

    def __init__(self, params, lr, b1=0.9, b2=0.999, eps=1e-8):
        if not (0.0 < b1 < 1.0 and 0.0 < b2 < 1.0) or eps <= 0 or lr <= 0:
            raise ConfigurationError("invalid Adam hyperparameters")
        self.lr = float(lr)
        self.b1 = float(b1)
        self.b2 = float(b2)
        self.eps = float(eps)
        self.t = 0
        self.m = np.zeros(params.size)
        self.v = np.zeros(params.size)

    def step(self, params):
        if params.size != self.m.size:
            raise ConfigurationError("parameter store does not match Adam state")
        self.t += 1
        kernels.adam_update(params.flat, params.grad_flat, self.m, self.v,
                            self.t, self.lr, self.b1, self.b2, self.eps)

    def copy(self):
        other = AdamState.__new__(AdamState)
        other.__dict__.update(self.__dict__)
        other.m = self.m.copy()
        other.v = self.v.copy()
        return other


def adam_step(state, params):
    """One bias-corrected Adam update; gradients are zeroed afterwards."""
    state.step(params)
    return params, state

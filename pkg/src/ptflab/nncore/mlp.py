"""Multi-head tanh MLPs.

Two evaluation routes share one parameter layout:

* ``mlp_apply`` builds an autograd graph (reference route, used by the
  gradient checks and anywhere a generic loss is convenient);
* ``forward`` / ``forward_batch`` / ``backward_batch`` call the kernels
  directly and are what the training loops use.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..errors import ConfigurationError
from . import tensor as T
from .params import ParameterStore

ACTIVATIONS = ("linear", "softmax", "sigmoid", "tanh")


@dataclass(frozen=True)
class Head:
    width: int
    activation: str = "linear"


@dataclass(frozen=True)
class MlpSpec:
    input_width: int
    hidden: tuple
    heads: tuple

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        heads = tuple(h if isinstance(h, Head) else Head(*h) for h in self.heads)
        object.__setattr__(self, "heads", heads)
        if self.input_width <= 0 or any(h <= 0 for h in self.hidden):
            raise ConfigurationError("MLP widths must be positive")
        if not heads:
            raise ConfigurationError("MLP needs at least one output head")
        for h in heads:
            if h.width <= 0:
                raise ConfigurationError("head widths must be positive")
            if h.activation not in ACTIVATIONS:
                raise ConfigurationError(f"unknown activation {h.activation!r}")
        object.__setattr__(self, "_dims", np.array(
            [self.input_width, *self.hidden, self.out_width], dtype=np.int64))

    @property
    def out_width(self):
        return sum(h.width for h in self.heads)

    @property
    def dims(self):
        return self._dims

    @property
    def n_layers(self):
        return len(self.hidden) + 1

    @property
    def param_count(self):
        return kernels.param_count(self._dims)

    def param_shapes(self):
        shapes = {}
        d = self._dims
        for l in range(self.n_layers):
            shapes[f"W{l}"] = (int(d[l]), int(d[l + 1]))
            shapes[f"b{l}"] = (int(d[l + 1]),)
        return shapes

    def head_slices(self):
        out, start = [], 0
        for h in self.heads:
            out.append(slice(start, start + h.width))
            start += h.width
        return out


def init_params(spec, rng, extra=None):
    """Glorot-uniform weights, zero biases; ``extra`` adds named zero tensors."""
    shapes = spec.param_shapes()
    for name, shape in (extra or {}).items():
        shapes[name] = shape
    store = ParameterStore(shapes)
    for l in range(spec.n_layers):
        fan_in, fan_out = store.shape(f"W{l}")
        lim = np.sqrt(6.0 / (fan_in + fan_out))
        store.set(f"W{l}", rng.uniform(-lim, lim, size=(fan_in, fan_out)))
    return store


def _check_params(spec, params):
    for name, shape in spec.param_shapes().items():
        if name not in params:
            raise ConfigurationError(f"missing parameter {name!r}")
        if params.shape(name) != shape:
            raise ConfigurationError(
                f"{name}: expected {shape}, got {params.shape(name)}")


def _activate_np(kind, z):
    if kind == "linear":
        return z
    if kind == "tanh":
        return np.tanh(z)
    if kind == "sigmoid":
        return 1.0 / (1.0 + np.exp(-z))
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _activate_t(kind, z):
    if kind == "linear":
        return z
    if kind == "tanh":
        return T.tanh(z)
    if kind == "sigmoid":
        return T.sigmoid(z)
    return T.softmax(z)


def apply_heads(spec, raw):
    return [_activate_np(h.activation, raw[..., sl])
            for h, sl in zip(spec.heads, spec.head_slices())]


def mlp_apply(spec, params, x):
    """Graph-building forward pass; returns one Tensor per head."""
    _check_params(spec, params)
    x = T.as_tensor(x)
    if x.shape[-1] != spec.input_width:
        raise ConfigurationError(
            f"input width {x.shape[-1]} does not match spec {spec.input_width}")
    a = x
    for l in range(spec.n_layers):
        a = T.affine(a, params.leaf(f"W{l}"), params.leaf(f"b{l}"))
        if l < spec.n_layers - 1:
            a = T.tanh(a)
    return [_activate_t(h.activation, a[..., sl])
            for h, sl in zip(spec.heads, spec.head_slices())]


def mlp_view(spec, params):
    return params.flat[:spec.param_count]


def forward_raw(spec, params, x):
    """Linear output layer for a single observation (kernel route)."""
    return kernels.mlp_forward(params.flat[:spec.param_count], spec.dims,
                               np.ascontiguousarray(x, dtype=np.float64))


def forward(spec, params, x):
    """Head outputs for one observation (kernel route)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (spec.input_width,):
        raise ConfigurationError(
            f"input shape {x.shape} does not match width {spec.input_width}")
    return apply_heads(spec, forward_raw(spec, params, x))


def forward_batch(spec, params, X):
    """Batched forward; returns (activations cache, raw linear output)."""
    acts = kernels.mlp_forward_batch(params.flat[:spec.param_count], spec.dims, X)
    return acts, acts[-1]


def backward_batch(spec, params, acts, d_raw):
    """Accumulate gradients of the loss into ``params.grad_flat``."""
    kernels.mlp_backward_batch(params.flat[:spec.param_count], spec.dims, acts,
                               d_raw, params.grad_flat[:spec.param_count])

"""Tensors, reverse-mode gradients, tanh MLPs and Adam."""
from .functional import (cross_entropy, entropy, gaussian_entropy,
                         gaussian_log_prob, log_softmax_np, softmax_np)
from .mlp import (Head, MlpSpec, apply_heads, backward_batch, forward,
                  forward_batch, forward_raw, init_params, mlp_apply)
from .optim import AdamState, adam_step
from .params import ParameterStore
from .tensor import Tensor, backprop

__all__ = [
    "AdamState", "Head", "MlpSpec", "ParameterStore", "Tensor", "adam_step",
    "apply_heads", "backprop", "backward_batch", "cross_entropy", "entropy",
    "forward", "forward_batch", "forward_raw", "gaussian_entropy",
    "gaussian_log_prob", "init_params", "log_softmax_np", "mlp_apply",
    "softmax_np",
]

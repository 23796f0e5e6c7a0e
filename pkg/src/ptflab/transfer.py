"""Distillation losses toward the active source policy and their weighting.

The weight on the distillation term is ``f(t) * (1 - beta)``: a global
time discount ``f(t) = (1 + tanh(3 - 0.001 t)) / 2`` gated by the active
option's termination probability, so a source that the option module is
about to abandon contributes little.
"""
from __future__ import annotations

import math
import threading

import numpy as np

from .errors import ConfigurationError, ContractViolation
from .nncore import functional as F
from .nncore import tensor as T

MODES = ("adaptive", "fixed", "off")


def time_discount(t, offset=3.0, slope=0.001):
    return 0.5 * (1.0 + math.tanh(offset - slope * t))


class TransferSchedule:
    """Mode, f(t) shape and the global environment-step counter."""

    def __init__(self, mode="adaptive", weight=0.5, offset=3.0, slope=0.001):
        if mode not in MODES:
            raise ConfigurationError(f"transfer mode must be one of {MODES}")
        self.mode = mode
        self.fixed_weight = float(weight)
        self.offset = float(offset)
        self.slope = float(slope)
        self.t = 0
        self._lock = threading.Lock()

    @classmethod
    def parse(cls, text):
        """``off``, ``adaptive`` or ``fixed:<w>``."""
        text = text.strip()
        if text in ("off", "adaptive"):
            return cls(text)
        if text.startswith("fixed"):
            _, _, w = text.partition(":")
            return cls("fixed", float(w) if w else 0.5)
        raise ConfigurationError(f"unknown transfer mode {text!r}")

    def describe(self):
        return f"fixed:{self.fixed_weight:g}" if self.mode == "fixed" else self.mode

    def tick(self, n=1):
        with self._lock:
            self.t += n
            return self.t

    def base(self, t=None):
        return time_discount(self.t if t is None else t, self.offset, self.slope)

    def weight(self, beta, t=None):
        if self.mode == "off":
            return 0.0
        if self.mode == "fixed":
            return self.fixed_weight
        return self.base(t) * (1.0 - beta)


def adaptive_weight(schedule, t, beta):
    """f(beta_o, t) under ``schedule``'s mode."""
    if not 0.0 <= beta <= 1.0:
        raise ContractViolation(f"beta {beta} outside [0, 1]")
    return schedule.weight(beta, t)


def distillation_points(mean, log_std, rng, k=4):
    """Source mean followed by ``k`` draws from the source Gaussian."""
    mean = np.asarray(mean, dtype=np.float64)
    std = np.exp(np.asarray(log_std, dtype=np.float64))
    draws = mean + std * rng.standard_normal((k,) + mean.shape)
    return np.concatenate([mean[None], draws], axis=0)


def policy_distillation_loss(source, target, points=None):
    """Cross-entropy of the target policy under the source policy.

    Discrete: ``source`` and ``target`` are probability vectors and the
    result is H(source || target).  Continuous: both are ``(mean, log_std)``
    pairs; the loss is the target's mean negative log density over
    ``points`` (default: the source mean only).  Gradients reach the target
    only.
    """
    src_cont = isinstance(source, tuple)
    tgt_cont = isinstance(target, tuple)
    if src_cont != tgt_cont:
        raise ContractViolation("source and target action spaces differ")
    if not src_cont:
        src = T.as_tensor(np.asarray(T.as_tensor(source).data))
        return F.cross_entropy(src, target)
    s_mean, _ = source
    t_mean, t_log_std = target
    s_mean = np.asarray(T.as_tensor(s_mean).data)
    if points is None:
        points = s_mean[None]
    points = np.asarray(points, dtype=np.float64)
    if points.shape[-1] != T.as_tensor(t_mean).shape[-1]:
        raise ContractViolation("source and target action widths differ")
    total = None
    for x in points:
        lp = F.gaussian_log_prob(t_mean, t_log_std, x)
        total = lp if total is None else T.add(total, lp)
    return T.mul(total, -1.0 / len(points))


def value_distillation_kl(q_teacher, q_student, tau=1.0):
    """KL(softmax(q_t / tau) || softmax(q_s)); temperature on the teacher only."""
    if tau <= 0:
        raise ContractViolation("temperature must be positive")
    q_t = np.asarray(T.as_tensor(q_teacher).data, dtype=np.float64)
    q_s = T.as_tensor(q_student)
    if q_t.shape[-1] != q_s.shape[-1]:
        raise ContractViolation("teacher and student widths differ")
    p_t = F.softmax_np(q_t / tau)
    log_p_t = F.log_softmax_np(q_t / tau)
    log_p_s = T.log(T.softmax(q_s))
    return T.sum(T.mul(p_t, T.add(log_p_t, T.neg(log_p_s))), axis=-1)


# fast numpy routes used by the training loops

def cross_entropy_grad_logits(q, p):
    """Per-row H(q || p) and its gradient w.r.t. the logits behind ``p``."""
    clipped = np.maximum(p, F.PROB_FLOOR)
    loss = -(q * np.log(clipped)).sum(axis=-1)
    gp = np.where(p >= F.PROB_FLOOR, -q / clipped, 0.0)
    return loss, p * (gp - (gp * p).sum(axis=-1, keepdims=True))


def gaussian_nll_grads(points, mean, log_std):
    """Mean NLL of ``points`` (K, d) under N(mean, exp(log_std)) and grads.

    Returns ``(loss, d_mean, d_log_std)`` for one state.
    """
    inv_var = np.exp(-2.0 * log_std)
    diff = points - mean
    nll = (0.5 * diff * diff * inv_var + log_std + F.HALF_LOG_2PI).sum(axis=-1)
    d_mean = -(diff * inv_var).mean(axis=0)
    d_log_std = (1.0 - diff * diff * inv_var).mean(axis=0)
    return nll.mean(), d_mean, d_log_std

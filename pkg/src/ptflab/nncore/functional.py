"""Probability-level losses on Tensors (differentiable) plus numpy helpers.

Batched inputs reduce over the last axis and return one value per row.
"""
from __future__ import annotations

import math

import numpy as np

from ..errors import ContractViolation
from . import tensor as T

PROB_FLOOR = 1e-8
HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
HALF_LOG_2PIE = 0.5 * math.log(2.0 * math.pi * math.e)


def softmax_np(z):
    z = np.asarray(z, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax_np(z):
    z = np.asarray(z, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def cross_entropy(p, q):
    """H(p || q) = -sum_i p_i log max(q_i, 1e-8)."""
    p, q = T.as_tensor(p), T.as_tensor(q)
    if p.shape[-1] != q.shape[-1]:
        raise ContractViolation(f"width mismatch: {p.shape[-1]} vs {q.shape[-1]}")
    if not np.allclose(p.data.sum(axis=-1), 1.0, atol=1e-6):
        raise ContractViolation("p must sum to 1")
    logq = T.log(T.clip(q, PROB_FLOOR, np.inf))
    return T.neg(T.sum(T.mul(p, logq), axis=-1))


def entropy(p):
    """Categorical entropy -sum p ln p (0 ln 0 taken as 0)."""
    p = T.as_tensor(p)
    safe = T.clip(p, 1e-300, np.inf)
    return T.neg(T.sum(T.mul(p, T.log(safe)), axis=-1))


def gaussian_entropy(log_std):
    log_std = T.as_tensor(log_std)
    return T.sum(T.add(log_std, HALF_LOG_2PIE), axis=-1)


def gaussian_log_prob(mean, log_std, action):
    """Diagonal Gaussian log density, summed over the last axis."""
    mean, log_std, action = T.as_tensor(mean), T.as_tensor(log_std), T.as_tensor(action)
    if mean.shape[-1] != log_std.shape[-1] or mean.shape[-1] != action.shape[-1]:
        raise ContractViolation("mean, log_std and action widths differ")
    inv_var = T.exp(T.mul(log_std, -2.0))
    diff = T.add(action, T.neg(mean))
    quad = T.mul(T.mul(T.square(diff), inv_var), -0.5)
    per_dim = T.add(T.add(quad, T.neg(log_std)), -HALF_LOG_2PI)
    return T.sum(per_dim, axis=-1)

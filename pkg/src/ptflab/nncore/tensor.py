"""Dense float64 tensors with tape-free reverse-mode differentiation.

Each non-leaf tensor keeps its parents and a closure mapping the upstream
gradient to parent gradients.  ``backprop`` walks the graph in reverse
topological order.  Leaves created by ``ParameterStore.leaf`` carry a *sink*:
a view into the store's gradient buffer that receives accumulated gradients.
"""
from __future__ import annotations

import numpy as np

from ..errors import ContractViolation


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_sink")

    def __init__(self, data, requires_grad=False, *, check=True, _sink=None):
        arr = np.array(data, dtype=np.float64)
        if check and not np.all(np.isfinite(arr)):
            raise ContractViolation("tensor data must be finite")
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad or _sink is not None
        self._parents = ()
        self._backward = None
        self._sink = _sink

    @property
    def shape(self):
        return self.data.shape

    def item(self):
        return float(self.data)

    def numpy(self):
        return self.data

    def __repr__(self):
        return f"Tensor(shape={self.shape}, data={self.data!r})"

    def __float__(self):
        return float(self.data)

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(as_tensor(other)))

    def __rsub__(self, other):
        return add(as_tensor(other), neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return getitem(self, key)


def as_tensor(x):
    if isinstance(x, Tensor):
        return x
    return Tensor(x, check=False)


def _node(data, parents, backward):
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.requires_grad = any(p.requires_grad for p in parents)
    out._parents = parents if out.requires_grad else ()
    out._backward = backward if out.requires_grad else None
    out._sink = None
    return out


def _unbroadcast(grad, shape):
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _node(a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def neg(a):
    return _node(-a.data, (a,), lambda g: (-g,))


def mul(a, b):
    """Elementwise product (with numpy broadcasting)."""
    a, b = as_tensor(a), as_tensor(b)
    return _node(a.data * b.data, (a, b),
                 lambda g: (_unbroadcast(g * b.data, a.shape),
                            _unbroadcast(g * a.data, b.shape)))


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        if a.data.ndim == 1:
            ga = g @ b.data.T
            gb = np.outer(a.data, g)
        else:
            ga = g @ b.data.T
            gb = a.data.T @ g
        return ga, gb

    return _node(a.data @ b.data, (a, b), backward)


def affine(x, W, b):
    """``x @ W + b``."""
    return add(matmul(x, W), b)


def tanh(a):
    out = np.tanh(a.data)
    return _node(out, (a,), lambda g: (g * (1.0 - out * out),))


def sigmoid(a):
    out = 1.0 / (1.0 + np.exp(-a.data))
    return _node(out, (a,), lambda g: (g * out * (1.0 - out),))


def softmax(a):
    """Softmax over the last axis."""
    z = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=-1, keepdims=True)),)

    return _node(out, (a,), backward)


def log(a):
    return _node(np.log(a.data), (a,), lambda g: (g / a.data,))


def exp(a):
    out = np.exp(a.data)
    return _node(out, (a,), lambda g: (g * out,))


def square(a):
    return _node(a.data * a.data, (a,), lambda g: (2.0 * g * a.data,))


def sum(a, axis=None):  # noqa: A001 - mirrors numpy naming
    out = a.data.sum(axis=axis)

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g, a.shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), a.shape).copy(),)

    return _node(np.asarray(out, dtype=np.float64), (a,), backward)


def mean(a, axis=None):
    n = a.data.size if axis is None else a.shape[axis]
    return mul(sum(a, axis), 1.0 / n)


def clip(a, lo, hi):
    """Clamp to ``[lo, hi]``; the gradient is zero where the clamp is active."""
    out = np.clip(a.data, lo, hi)
    mask = (a.data >= lo) & (a.data <= hi)
    return _node(out, (a,), lambda g: (g * mask,))


def minimum(a, b):
    """Elementwise minimum; ties send the gradient to ``a``."""
    a, b = as_tensor(a), as_tensor(b)
    take_a = a.data <= b.data
    return _node(np.minimum(a.data, b.data), (a, b),
                 lambda g: (_unbroadcast(g * take_a, a.shape),
                            _unbroadcast(g * ~take_a, b.shape)))


def getitem(a, key):
    def backward(g):
        full = np.zeros_like(a.data)
        np.add.at(full, key, g)
        return (full,)

    return _node(np.array(a.data[key]), (a,), backward)


def backprop(loss):
    """Accumulate d(loss)/d(leaf) into every leaf reachable from ``loss``.

    Parameter leaves add into their store's gradient buffer; other leaves
    created with ``requires_grad=True`` add into ``.grad``.  Gradients
    accumulate across calls.
    """
    if loss.data.size != 1:
        raise ContractViolation(f"backprop needs a scalar loss, got shape {loss.shape}")
    order, seen = [], set()
    stack = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    grads = {id(loss): np.ones_like(loss.data)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            if node._sink is not None:
                node._sink += g
            else:
                node.grad = g if node.grad is None else node.grad + g
            continue
        for p, pg in zip(node._parents, node._backward(g)):
            if not p.requires_grad:
                continue
            if id(p) in grads:
                grads[id(p)] = grads[id(p)] + pg
            else:
                grads[id(p)] = pg

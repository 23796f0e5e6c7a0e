"""Named parameter tensors backed by one contiguous buffer.

Keeping every value in a single flat float64 array (and the gradients in a
twin array) lets the compiled kernels and the optimizer treat a whole
network as one vector, while callers still address ``W0``, ``b0`` ... by
name through views.
"""
from __future__ import annotations

import math

import numpy as np

from ..errors import ConfigurationError
from .tensor import Tensor


class ParameterStore:
    def __init__(self, shapes):
        self._shapes = {}
        self._slices = {}
        off = 0
        for name, shape in shapes.items():
            shape = tuple(int(s) for s in shape)
            if name in self._shapes:
                raise ConfigurationError(f"duplicate parameter name {name!r}")
            if any(s <= 0 for s in shape):
                raise ConfigurationError(f"parameter {name!r} has non-positive dims {shape}")
            size = math.prod(shape)
            self._shapes[name] = shape
            self._slices[name] = slice(off, off + size)
            off += size
        self.flat = np.zeros(off)
        self.grad_flat = np.zeros(off)

    @property
    def names(self):
        return list(self._shapes)

    @property
    def size(self):
        return self.flat.size

    def shape(self, name):
        return self._shapes[name]

    def value(self, name):
        return self.flat[self._slices[name]].reshape(self._shapes[name])

    def grad(self, name):
        return self.grad_flat[self._slices[name]].reshape(self._shapes[name])

    def offset(self, name):
        return self._slices[name].start

    def leaf(self, name):
        """Autograd leaf viewing ``name``; backprop accumulates into its grad."""
        return Tensor(self.value(name), check=False, _sink=self.grad(name))

    def leaves(self):
        return {n: self.leaf(n) for n in self._shapes}

    def set(self, name, value):
        value = np.asarray(value, dtype=np.float64)
        if value.shape != self._shapes[name]:
            raise ConfigurationError(
                f"{name}: expected shape {self._shapes[name]}, got {value.shape}")
        self.flat[self._slices[name]] = value.ravel()

    def zero_grad(self):
        self.grad_flat[:] = 0.0

    def copy(self):
        other = ParameterStore(self._shapes)
        other.flat[:] = self.flat
        other.grad_flat[:] = self.grad_flat
        return other

    def load_flat(self, values):
        values = np.asarray(values, dtype=np.float64)
        if values.shape != self.flat.shape:
            raise ConfigurationError(
                f"expected {self.flat.size} values, got {values.size}")
        self.flat[:] = values

    def __contains__(self, name):
        return name in self._shapes

    def __repr__(self):
        body = ", ".join(f"{n}{s}" for n, s in self._shapes.items())
        return f"ParameterStore({body})"

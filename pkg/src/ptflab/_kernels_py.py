"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``.

Same signatures, same parameter layout.  Results agree with the compiled
backend to rounding (summation order differs inside matrix products).
"""
import math

import numpy as np


def _layers(flat, dims):
    off = 0
    for l in range(len(dims) - 1):
        n_in, n_out = int(dims[l]), int(dims[l + 1])
        W = flat[off:off + n_in * n_out].reshape(n_in, n_out)
        off += n_in * n_out
        b = flat[off:off + n_out]
        off += n_out
        yield off - n_in * n_out - n_out, W, b


def param_count(dims):
    return int(sum(int(dims[l]) * int(dims[l + 1]) + int(dims[l + 1])
                   for l in range(len(dims) - 1)))


def mlp_forward(flat, dims, x, hidden=None):
    a = np.asarray(x, dtype=np.float64)
    layers = list(_layers(flat, dims))
    for i, (_, W, b) in enumerate(layers):
        a = a @ W + b
        if i < len(layers) - 1:
            a = np.tanh(a)
            if hidden is not None and i == len(layers) - 2:
                hidden[:] = a
    return np.array(a)


def mlp_forward_batch(flat, dims, X):
    A = np.ascontiguousarray(X, dtype=np.float64)
    acts = [A]
    layers = list(_layers(flat, dims))
    for i, (_, W, b) in enumerate(layers):
        A = A @ W + b
        if i < len(layers) - 1:
            A = np.tanh(A)
        acts.append(A)
    return acts


def mlp_backward_batch(flat, dims, acts, d_out, grad):
    delta = np.array(d_out, dtype=np.float64)
    if delta.shape[0] == 0:
        return
    layers = list(_layers(flat, dims))
    for l in range(len(layers) - 1, -1, -1):
        off, W, _ = layers[l]
        n_in, n_out = W.shape
        prev = acts[l]
        grad[off:off + n_in * n_out] += (prev.T @ delta).ravel()
        grad[off + n_in * n_out:off + n_in * n_out + n_out] += delta.sum(axis=0)
        if l == 0:
            break
        delta = (delta @ W.T) * (1.0 - prev * prev)


def adam_update(value, grad, m, v, step, lr, b1, b2, eps):
    c1 = 1.0 - b1 ** step
    c2 = 1.0 - b2 ** step
    m *= b1
    m += (1.0 - b1) * grad
    v *= b2
    v += (1.0 - b2) * grad * grad
    value -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    grad[:] = 0.0


def pinball_advance(x, y, vx, vy, edges, radius, tx, ty, tr, substeps, step_len):
    dt = step_len / substeps
    bounces = 0
    rows = [tuple(float(c) for c in row) for row in edges]
    for _ in range(substeps):
        x += vx * dt
        y += vy * dt
        for x1, y1, x2, y2 in rows:
            ex = x2 - x1
            ey = y2 - y1
            px = x - x1
            py = y - y1
            l2 = ex * ex + ey * ey
            t = (px * ex + py * ey) / l2
            if t < 0.0:
                t = 0.0
            elif t > 1.0:
                t = 1.0
            cx = x1 + t * ex
            cy = y1 + t * ey
            dx = x - cx
            dy = y - cy
            d = math.sqrt(dx * dx + dy * dy)
            if d < radius and d > 0.0:
                nx = dx / d
                ny = dy / d
                vn = vx * nx + vy * ny
                if vn < 0.0:
                    vx = vx - 2.0 * vn * nx
                    vy = vy - 2.0 * vn * ny
                    bounces += 1
                x = cx + nx * radius
                y = cy + ny * radius
        dx = x - tx
        dy = y - ty
        if dx * dx + dy * dy < tr * tr:
            return x, y, vx, vy, True, bounces
    return x, y, vx, vy, False, bounces

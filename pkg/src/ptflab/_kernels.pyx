# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: dense tanh MLPs, fused Adam, pinball integration.

Every function here has a numpy twin in ``_kernels_py`` with the same
signature; ``ptflab.kernels`` picks one at import.

Parameter layout (shared by both backends): for each layer ``l`` the weight
block ``dims[l] x dims[l+1]`` (row-major, ``y = x @ W + b``) followed by the
bias ``dims[l+1]``.  Hidden layers use tanh, the last layer is linear.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, expm1
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()


cdef inline void _gemm(bint ta, bint tb, int m, int n, int k, double alpha,
                       double* A, int lda, double* B, int ldb, double beta,
                       double* C, int ldc) noexcept nogil:
    # row-major C[m,n] = alpha * op(A) @ op(B) + beta * C via column-major BLAS
    cdef char ca = b'T' if ta else b'N'
    cdef char cb = b'T' if tb else b'N'
    dgemm(&cb, &ca, &n, &m, &k, &alpha, B, &ldb, A, &lda, &beta, C, &ldc)


cdef inline double _tanh(double z) noexcept nogil:
    cdef double t
    if z >= 0.0:
        t = expm1(-2.0 * z)
        return -t / (t + 2.0)
    t = expm1(2.0 * z)
    return t / (t + 2.0)


cdef inline double* _dptr(cnp.ndarray a) except NULL:
    if cnp.PyArray_TYPE(a) != cnp.NPY_DOUBLE or not cnp.PyArray_IS_C_CONTIGUOUS(a):
        raise TypeError("expected a C-contiguous float64 array")
    return <double*> cnp.PyArray_DATA(a)


def param_count(dims):
    cdef Py_ssize_t l, total = 0
    for l in range(len(dims) - 1):
        total += dims[l] * dims[l + 1] + dims[l + 1]
    return total


DEF MAX_WIDTH = 1024


def mlp_forward(cnp.ndarray flat, cnp.ndarray dims, cnp.ndarray x, hidden=None):
    """Single-vector forward pass; returns the linear output layer.

    When ``hidden`` is given, the last hidden activation is copied into it.
    """
    cdef double* w = _dptr(flat)
    cdef double* xp = _dptr(x)
    cdef long* dp = <long*> cnp.PyArray_DATA(dims)
    cdef Py_ssize_t nl = cnp.PyArray_DIM(dims, 0) - 1
    cdef Py_ssize_t l, i, j, off = 0, n_in, n_out
    cdef double a[MAX_WIDTH]
    cdef double z[MAX_WIDTH]
    cdef double acc
    for l in range(nl + 1):
        if dp[l] > MAX_WIDTH:
            raise ValueError("layer wider than kernel limit")
    for i in range(dp[0]):
        a[i] = xp[i]
    for l in range(nl):
        n_in = dp[l]
        n_out = dp[l + 1]
        for j in range(n_out):
            z[j] = w[off + n_in * n_out + j]
        for i in range(n_in):
            acc = a[i]
            for j in range(n_out):
                z[j] += acc * w[off + i * n_out + j]
        off += n_in * n_out + n_out
        if l < nl - 1:
            for j in range(n_out):
                a[j] = _tanh(z[j])
    cdef double* hp
    if hidden is not None and nl > 1:
        hp = _dptr(hidden)
        for j in range(dp[nl - 1]):
            hp[j] = a[j]
    cdef cnp.ndarray out = np.empty(dp[nl])
    cdef double* op = <double*> cnp.PyArray_DATA(out)
    for j in range(dp[nl]):
        op[j] = z[j]
    return out


def mlp_forward_batch(cnp.ndarray flat, cnp.ndarray dims, X):
    """Batched forward pass keeping every layer's activations for backward.

    Returns ``[X, h_1, ..., h_L, out]``.
    """
    cdef double* w = _dptr(flat)
    cdef long* dp = <long*> cnp.PyArray_DATA(dims)
    cdef cnp.ndarray A = np.ascontiguousarray(X, dtype=np.float64)
    cdef int B = A.shape[0]
    cdef Py_ssize_t nl = cnp.PyArray_DIM(dims, 0) - 1
    cdef Py_ssize_t l, off = 0
    cdef int n_in, n_out, r, j
    cdef cnp.ndarray Z
    cdef double* zp
    cdef double* bp
    acts = [A]
    for l in range(nl):
        n_in = dp[l]
        n_out = dp[l + 1]
        Z = np.empty((B, n_out))
        zp = <double*> cnp.PyArray_DATA(Z)
        bp = w + off + n_in * n_out
        for r in range(B):
            for j in range(n_out):
                zp[r * n_out + j] = bp[j]
        if B > 0:
            _gemm(False, False, B, n_out, n_in, 1.0, <double*> cnp.PyArray_DATA(A), n_in,
                  w + off, n_out, 1.0, zp, n_out)
            if l < nl - 1:
                np.tanh(Z, out=Z)
        off += n_in * n_out + n_out
        acts.append(Z)
        A = Z
    return acts


def mlp_backward_batch(cnp.ndarray flat, cnp.ndarray dims, list acts,
                       d_out, cnp.ndarray grad):
    """Accumulate parameter gradients into ``grad`` given dLoss/dOutput."""
    cdef double* w = _dptr(flat)
    cdef double* g = _dptr(grad)
    cdef long* dmp = <long*> cnp.PyArray_DATA(dims)
    cdef Py_ssize_t nl = cnp.PyArray_DIM(dims, 0) - 1
    cdef cnp.ndarray delta = np.array(d_out, dtype=np.float64, order="C", copy=True)
    cdef cnp.ndarray prev
    cdef cnp.ndarray dprev
    cdef int B = delta.shape[0]
    cdef Py_ssize_t l, off
    cdef Py_ssize_t offsets[64]
    cdef int n_in, n_out, r, j
    cdef double* dp
    cdef double* pp
    cdef double* qp
    if B == 0:
        return
    if nl > 64:
        raise ValueError("too many layers")
    off = 0
    for l in range(nl):
        offsets[l] = off
        off += dmp[l] * dmp[l + 1] + dmp[l + 1]
    for l in range(nl - 1, -1, -1):
        n_in = dmp[l]
        n_out = dmp[l + 1]
        off = offsets[l]
        prev = acts[l]
        pp = _dptr(prev)
        dp = <double*> cnp.PyArray_DATA(delta)
        _gemm(True, False, n_in, n_out, B, 1.0, pp, n_in, dp, n_out, 1.0, g + off, n_out)
        for r in range(B):
            for j in range(n_out):
                g[off + n_in * n_out + j] += dp[r * n_out + j]
        if l == 0:
            break
        dprev = np.empty((B, n_in))
        qp = <double*> cnp.PyArray_DATA(dprev)
        _gemm(False, True, B, n_in, n_out, 1.0, dp, n_out, w + off, n_out, 0.0, qp, n_in)
        for r in range(B * n_in):
            qp[r] = qp[r] * (1.0 - pp[r] * pp[r])
        delta = dprev


def adam_update(cnp.ndarray value, cnp.ndarray grad, cnp.ndarray m, cnp.ndarray v,
                long step, double lr, double b1, double b2, double eps):
    """Bias-corrected Adam step on flat buffers; zeroes ``grad`` afterwards."""
    cdef double* pv = _dptr(value)
    cdef double* pg = _dptr(grad)
    cdef double* pm = _dptr(m)
    cdef double* ps = _dptr(v)
    cdef Py_ssize_t i, n = cnp.PyArray_SIZE(value)
    cdef double c1 = 1.0 - b1 ** step
    cdef double c2 = 1.0 - b2 ** step
    cdef double gi, mi, vi
    cdef double step_size = lr / c1
    cdef double inv_c2 = 1.0 / c2
    if cnp.PyArray_SIZE(grad) != n or cnp.PyArray_SIZE(m) != n or cnp.PyArray_SIZE(v) != n:
        raise ValueError("Adam buffers differ in size")
    for i in range(n):
        gi = pg[i]
        mi = b1 * pm[i] + (1.0 - b1) * gi
        vi = b2 * ps[i] + (1.0 - b2) * gi * gi
        pm[i] = mi
        ps[i] = vi
        pv[i] -= step_size * mi / (sqrt(vi * inv_c2) + eps)
        pg[i] = 0.0


def pinball_advance(double x, double y, double vx, double vy,
                    const double[:, :] edges, double radius,
                    double tx, double ty, double tr,
                    int substeps, double step_len):
    """Integrate one action's worth of motion with elastic edge collisions.

    ``edges`` rows are ``(x1, y1, x2, y2)``.  Returns
    ``(x, y, vx, vy, reached_target, n_bounces)``.
    """
    cdef int s, e, bounces = 0
    cdef Py_ssize_t ne = edges.shape[0]
    cdef double dt = step_len / substeps
    cdef double ex, ey, px, py, t, l2, cx, cy, dx, dy, d, nx, ny, vn
    for s in range(substeps):
        x += vx * dt
        y += vy * dt
        for e in range(ne):
            ex = edges[e, 2] - edges[e, 0]
            ey = edges[e, 3] - edges[e, 1]
            px = x - edges[e, 0]
            py = y - edges[e, 1]
            l2 = ex * ex + ey * ey
            t = (px * ex + py * ey) / l2
            if t < 0.0:
                t = 0.0
            elif t > 1.0:
                t = 1.0
            cx = edges[e, 0] + t * ex
            cy = edges[e, 1] + t * ey
            dx = x - cx
            dy = y - cy
            d = sqrt(dx * dx + dy * dy)
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

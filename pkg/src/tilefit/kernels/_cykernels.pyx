# cython: boundscheck=False, wraparound=False, cdivision=True
# cython: initializedcheck=False
"""Compiled training kernels for dense coordinate networks.

Same contract as ``pyref``: flat parameter vector, MSE loss, exact
hand-derived gradients, bias-corrected Adam.  Matrix products go through
BLAS (sgemm/dgemm); activations, bias adds and the optimizer are plain C
loops.  The multi-step driver holds the GIL only for setup, so distinct
sub-networks can train on real threads.
"""

from libc.math cimport cos, cosf, isfinite, pow, sin, sinf, sqrt, sqrtf
from libc.stdlib cimport free, malloc

import numpy as np

from scipy.linalg.cython_blas cimport dgemm, sgemm

NAME = "cython"

ACT_SINE = 0
ACT_RELU = 1

DEF _ACT_SINE = 0
DEF _ACT_RELU = 1

ctypedef fused real:
    float
    double

ctypedef Py_ssize_t ix


cdef void _gemm_nt(int batch, int dout, int k, real* x, real* w, real* y) noexcept nogil:
    # y (batch x dout) = x (batch x k) @ w (dout x k)^T, all row-major.
    cdef int m = dout, n = batch, kk = k
    cdef int lda = k, ldb = k, ldc = dout
    cdef real one = <real>1, zero = <real>0
    cdef char t_t = b'T', t_n = b'N'
    if real is float:
        sgemm(&t_t, &t_n, &m, &n, &kk, &one, <float*>w, &lda, <float*>x, &ldb, &zero, <float*>y, &ldc)
    else:
        dgemm(&t_t, &t_n, &m, &n, &kk, &one, <double*>w, &lda, <double*>x, &ldb, &zero, <double*>y, &ldc)


cdef void _gemm_wgrad(int batch, int dout, int din, real* h_in, real* g, real* dw) noexcept nogil:
    # dw (dout x din) = g (batch x dout)^T @ h_in (batch x din), row-major.
    cdef int m = din, n = dout, kk = batch
    cdef int lda = din, ldb = dout, ldc = din
    cdef real one = <real>1, zero = <real>0
    cdef char t_t = b'T', t_n = b'N'
    if real is float:
        sgemm(&t_n, &t_t, &m, &n, &kk, &one, <float*>h_in, &lda, <float*>g, &ldb, &zero, <float*>dw, &ldc)
    else:
        dgemm(&t_n, &t_t, &m, &n, &kk, &one, <double*>h_in, &lda, <double*>g, &ldb, &zero, <double*>dw, &ldc)


cdef void _gemm_hgrad(int batch, int dout, int din, real* g, real* w, real* dh) noexcept nogil:
    # dh (batch x din) = g (batch x dout) @ w (dout x din), row-major.
    cdef int m = din, n = batch, kk = dout
    cdef int lda = din, ldb = dout, ldc = din
    cdef real one = <real>1, zero = <real>0
    cdef char t_n = b'N'
    if real is float:
        sgemm(&t_n, &t_n, &m, &n, &kk, &one, <float*>w, &lda, <float*>g, &ldb, &zero, <float*>dh, &ldc)
    else:
        dgemm(&t_n, &t_n, &m, &n, &kk, &one, <double*>w, &lda, <double*>g, &ldb, &zero, <double*>dh, &ldc)


cdef inline double _hidden_scale(int act, int layer, double omega0) noexcept nogil:
    if act == _ACT_SINE:
        return omega0
    return 1.0


cdef void _forward(real* theta, long* woff, long* boff, int* dims, int nlayers,
                   int act, double omega0, real* x, int batch,
                   real* zbuf, real* hbuf, long* zoff) noexcept nogil:
    # Fills pre-activations zbuf and hidden activations hbuf per layer;
    # the last layer's z is the network output (no activation).
    cdef int l, dout, din
    cdef ix i, n
    cdef real* h_in = x
    cdef real* z
    cdef real* h
    cdef real om
    for l in range(nlayers):
        dout = dims[l + 1]
        din = dims[l]
        z = zbuf + zoff[l]
        _gemm_nt(batch, dout, din, h_in, theta + woff[l], z)
        n = <ix>batch * dout
        for i in range(n):
            z[i] = z[i] + (theta + boff[l])[i % dout]
        if l < nlayers - 1:
            h = hbuf + zoff[l]
            om = <real>_hidden_scale(act, l, omega0)
            if act == _ACT_SINE:
                if real is float:
                    for i in range(n):
                        h[i] = sinf(om * z[i])
                else:
                    for i in range(n):
                        h[i] = sin(om * z[i])
            else:
                for i in range(n):
                    h[i] = z[i] if z[i] > 0 else <real>0
            h_in = h


cdef double _mse(real* y, real* t, ix n) noexcept nogil:
    cdef double acc = 0.0, r
    cdef ix i
    for i in range(n):
        r = <double>y[i] - <double>t[i]
        acc += r * r
    return acc / <double>n


cdef void _backward(real* theta, real* grad, long* woff, long* boff, int* dims,
                    int nlayers, int act, double omega0, real* x, real* targets,
                    int batch, real* zbuf, real* hbuf, real* gbuf, long* zoff) noexcept nogil:
    # gbuf[l] holds dL/dZ_l while walking backwards; grad mirrors theta.
    cdef int l, dout, din
    cdef ix i, j, n
    cdef real* z
    cdef real* g
    cdef real* gprev
    cdef real* h_in
    cdef real om, scale, acc
    cdef int last = nlayers - 1

    dout = dims[nlayers]
    n = <ix>batch * dout
    g = gbuf + zoff[last]
    z = zbuf + zoff[last]
    scale = <real>(2.0 / <double>n)
    for i in range(n):
        g[i] = scale * (z[i] - targets[i])

    for l in range(last, -1, -1):
        dout = dims[l + 1]
        din = dims[l]
        g = gbuf + zoff[l]
        h_in = x if l == 0 else hbuf + zoff[l - 1]
        _gemm_wgrad(batch, dout, din, h_in, g, grad + woff[l])
        for j in range(dout):
            acc = <real>0
            for i in range(batch):
                acc = acc + g[i * dout + j]
            (grad + boff[l])[j] = acc
        if l > 0:
            gprev = gbuf + zoff[l - 1]
            _gemm_hgrad(batch, dout, din, g, theta + woff[l], gprev)
            z = zbuf + zoff[l - 1]
            n = <ix>batch * din
            om = <real>_hidden_scale(act, l - 1, omega0)
            if act == _ACT_SINE:
                if real is float:
                    for i in range(n):
                        gprev[i] = gprev[i] * om * cosf(om * z[i])
                else:
                    for i in range(n):
                        gprev[i] = gprev[i] * om * cos(om * z[i])
            else:
                for i in range(n):
                    if z[i] <= 0:
                        gprev[i] = <real>0


cdef void _adam(real* theta, real* grad, real* m, real* v, long t, ix n,
                double lr, double beta1, double beta2, double eps) noexcept nogil:
    cdef real b1 = <real>beta1, b2 = <real>beta2
    cdef real c1 = <real>(1.0 - beta1), c2 = <real>(1.0 - beta2)
    cdef real bc1 = <real>(1.0 - pow(beta1, <double>t))
    cdef real bc2 = <real>(1.0 - pow(beta2, <double>t))
    cdef real rlr = <real>lr, reps = <real>eps
    cdef real mhat, vhat
    cdef ix i
    for i in range(n):
        m[i] = b1 * m[i] + c1 * grad[i]
        v[i] = b2 * v[i] + c2 * grad[i] * grad[i]
        mhat = m[i] / bc1
        vhat = v[i] / bc2
        if real is float:
            theta[i] = theta[i] - rlr * mhat / (sqrtf(vhat) + reps)
        else:
            theta[i] = theta[i] - rlr * mhat / (sqrt(vhat) + reps)


cdef class _Plan:
    """Precomputed offsets plus C-int dims for one layer stack."""
    cdef long* woff
    cdef long* boff
    cdef long* zoff
    cdef int* dims
    cdef int nlayers
    cdef long ntheta
    cdef long zlen  # per batch row

    def __cinit__(self, dims_arr):
        cdef int nl = len(dims_arr) - 1
        self.nlayers = nl
        self.woff = <long*>malloc(nl * sizeof(long))
        self.boff = <long*>malloc(nl * sizeof(long))
        self.zoff = <long*>malloc(nl * sizeof(long))
        self.dims = <int*>malloc((nl + 1) * sizeof(int))
        cdef long pos = 0
        cdef long zpos = 0
        cdef int l
        for l in range(nl + 1):
            self.dims[l] = dims_arr[l]
        for l in range(nl):
            self.woff[l] = pos
            pos += <long>self.dims[l + 1] * self.dims[l]
            self.boff[l] = pos
            pos += self.dims[l + 1]
            self.zoff[l] = zpos
            zpos += self.dims[l + 1]
        self.ntheta = pos
        self.zlen = zpos

    def __dealloc__(self):
        free(self.woff)
        free(self.boff)
        free(self.zoff)
        free(self.dims)


cdef _Plan _make_plan(dims, int batch, long ntheta):
    cdef _Plan plan = _Plan(dims)
    if plan.ntheta != ntheta:
        raise ValueError(f"theta has {ntheta} entries, layer shapes need {plan.ntheta}")
    cdef int l
    for l in range(plan.nlayers):
        plan.zoff[l] = plan.zoff[l] * batch
    return plan


def forward(real[::1] theta, dims, int act, double omega0, real[:, ::1] x):
    """Evaluate the MLP on feature rows ``x``; returns ``batch x out``."""
    cdef int batch = x.shape[0]
    if x.shape[1] != int(dims[0]):
        raise ValueError(f"x has {x.shape[1]} columns, dims[0] is {dims[0]}")
    cdef _Plan plan = _make_plan(dims, batch, theta.shape[0])
    dtype = np.float32 if real is float else np.float64
    zbuf = np.empty(batch * plan.zlen, dtype=dtype)
    hbuf = np.empty(batch * plan.zlen, dtype=dtype)
    cdef real[::1] zv = zbuf, hv = hbuf
    with nogil:
        _forward(&theta[0], plan.woff, plan.boff, plan.dims, plan.nlayers,
                 act, omega0, &x[0, 0], batch, &zv[0], &hv[0], plan.zoff)
    start = plan.zoff[plan.nlayers - 1]
    stop = start + batch * plan.dims[plan.nlayers]
    return zbuf[start:stop].reshape(batch, int(dims[-1])).copy()


def loss_and_grad(real[::1] theta, dims, int act, double omega0,
                  real[:, ::1] x, real[:, ::1] targets):
    """MSE loss and its exact gradient w.r.t. every entry of theta."""
    cdef int batch = x.shape[0]
    cdef _Plan plan = _make_plan(dims, batch, theta.shape[0])
    if targets.shape[0] != batch or targets.shape[1] != plan.dims[plan.nlayers]:
        raise ValueError("target shape does not match network output")
    dtype = np.float32 if real is float else np.float64
    zbuf = np.empty(batch * plan.zlen, dtype=dtype)
    hbuf = np.empty(batch * plan.zlen, dtype=dtype)
    gbuf = np.empty(batch * plan.zlen, dtype=dtype)
    grad = np.zeros(theta.shape[0], dtype=dtype)
    cdef real[::1] zv = zbuf, hv = hbuf, gv = gbuf, gr = grad
    cdef double loss
    with nogil:
        _forward(&theta[0], plan.woff, plan.boff, plan.dims, plan.nlayers,
                 act, omega0, &x[0, 0], batch, &zv[0], &hv[0], plan.zoff)
        loss = _mse(&zv[0] + plan.zoff[plan.nlayers - 1], &targets[0, 0],
                    <ix>batch * plan.dims[plan.nlayers])
        _backward(&theta[0], &gr[0], plan.woff, plan.boff, plan.dims, plan.nlayers,
                  act, omega0, &x[0, 0], &targets[0, 0], batch,
                  &zv[0], &hv[0], &gv[0], plan.zoff)
    return loss, grad


def adam_step(real[::1] theta, real[::1] grad, real[::1] m, real[::1] v,
              long t, double lr, double beta1, double beta2, double eps):
    """One in-place bias-corrected Adam update; returns the new step count."""
    cdef ix n = theta.shape[0]
    if grad.shape[0] != n or m.shape[0] != n or v.shape[0] != n:
        raise ValueError("optimizer state does not match parameter count")
    with nogil:
        _adam(&theta[0], &grad[0], &m[0], &v[0], t + 1, n, lr, beta1, beta2, eps)
    return t + 1


def train_steps(real[::1] theta, real[::1] m, real[::1] v, long t,
                dims, int act, double omega0,
                real[:, ::1] x, real[:, ::1] targets,
                long nsteps, double lr, double beta1, double beta2, double eps,
                double[::1] loss_out):
    """Run ``nsteps`` full-batch Adam updates in place.

    ``loss_out[i]`` receives the pre-update loss of step ``i``.  Stops early
    when the loss goes non-finite and reports the number of completed steps.
    """
    cdef int batch = x.shape[0]
    cdef _Plan plan = _make_plan(dims, batch, theta.shape[0])
    if targets.shape[0] != batch or targets.shape[1] != plan.dims[plan.nlayers]:
        raise ValueError("target shape does not match network output")
    if loss_out.shape[0] < nsteps:
        raise ValueError("loss_out is shorter than nsteps")
    dtype = np.float32 if real is float else np.float64
    zbuf = np.empty(batch * plan.zlen, dtype=dtype)
    hbuf = np.empty(batch * plan.zlen, dtype=dtype)
    gbuf = np.empty(batch * plan.zlen, dtype=dtype)
    grad = np.empty(theta.shape[0], dtype=dtype)
    cdef real[::1] zv = zbuf, hv = hbuf, gv = gbuf, gr = grad
    cdef ix ntheta = theta.shape[0]
    cdef ix nout = <ix>batch * plan.dims[plan.nlayers]
    cdef long it, done = 0, tc = t
    cdef double loss
    with nogil:
        for it in range(nsteps):
            _forward(&theta[0], plan.woff, plan.boff, plan.dims, plan.nlayers,
                     act, omega0, &x[0, 0], batch, &zv[0], &hv[0], plan.zoff)
            loss = _mse(&zv[0] + plan.zoff[plan.nlayers - 1], &targets[0, 0], nout)
            loss_out[it] = loss
            if not isfinite(loss):
                break
            _backward(&theta[0], &gr[0], plan.woff, plan.boff, plan.dims, plan.nlayers,
                      act, omega0, &x[0, 0], &targets[0, 0], batch,
                      &zv[0], &hv[0], &gv[0], plan.zoff)
            tc = tc + 1
            _adam(&theta[0], &gr[0], &m[0], &v[0], tc, ntheta, lr, beta1, beta2, eps)
            done = done + 1
    return done, tc

"""Pure-numpy training kernels for dense coordinate networks.

This module is the reference implementation of the kernel contract; the
compiled extension (``_cykernels``) must match it up to floating-point
summation order.  All functions operate on a flat parameter vector laid
out layer by layer as ``W`` (row-major ``out x in``) followed by ``b``.

The loss everywhere is the mean squared error over all ``batch x out``
output entries.
"""

from __future__ import annotations

import math

import numpy as np

NAME = "python"

ACT_SINE = 0
ACT_RELU = 1


def layer_offsets(dims) -> list[tuple[int, int, int, int]]:
    """Per-layer (weight start, bias start, out, in) offsets into theta."""
    offsets = []
    pos = 0
    for k in range(1, len(dims)):
        dout, din = int(dims[k]), int(dims[k - 1])
        offsets.append((pos, pos + dout * din, dout, din))
        pos += dout * din + dout
    return offsets


def param_count(dims) -> int:
    return sum(int(dims[k]) * int(dims[k - 1]) + int(dims[k]) for k in range(1, len(dims)))


def _hidden_scale(act: int, layer: int, omega0: float) -> float:
    return omega0 if act == ACT_SINE else 1.0


def _forward_cached(theta, dims, act, omega0, x):
    offsets = layer_offsets(dims)
    last = len(offsets) - 1
    pre, post = [], [x]
    h = x
    for k, (w0, b0, dout, din) in enumerate(offsets):
        w = theta[w0:b0].reshape(dout, din)
        b = theta[b0 : b0 + dout]
        z = h @ w.T + b
        pre.append(z)
        if k < last:
            if act == ACT_SINE:
                om = _hidden_scale(act, k, omega0)
                h = np.sin(om * z)
            else:
                h = np.maximum(z, 0)
            post.append(h)
    return pre, post


def forward(theta, dims, act, omega0, x):
    """Evaluate the MLP on feature rows ``x``; returns ``batch x out``."""
    pre, _ = _forward_cached(theta, dims, act, omega0, x)
    return pre[-1]


def loss_and_grad(theta, dims, act, omega0, x, targets):
    """MSE loss and its exact gradient w.r.t. every entry of theta."""
    offsets = layer_offsets(dims)
    last = len(offsets) - 1
    pre, post = _forward_cached(theta, dims, act, omega0, x)
    y = pre[-1]
    resid = y - targets
    loss = float(np.mean(resid.astype(np.float64) ** 2))

    grad = np.zeros_like(theta)
    # g holds dL/dZ of the current layer while walking backwards.
    g = resid * (2.0 / resid.size)
    for k in range(last, -1, -1):
        w0, b0, dout, din = offsets[k]
        w = theta[w0:b0].reshape(dout, din)
        h_in = post[k]
        grad[w0:b0] = (g.T @ h_in).reshape(-1)
        grad[b0 : b0 + dout] = g.sum(axis=0)
        if k > 0:
            dh = g @ w
            z = pre[k - 1]
            if act == ACT_SINE:
                om = _hidden_scale(act, k - 1, omega0)
                g = dh * (om * np.cos(om * z))
            else:
                g = dh * (z > 0)
    return loss, grad


def adam_step(theta, grad, m, v, t, lr, beta1, beta2, eps):
    """One in-place bias-corrected Adam update; returns the new step count."""
    t += 1
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * np.square(grad)
    mhat = m / (1.0 - beta1**t)
    vhat = v / (1.0 - beta2**t)
    theta -= lr * mhat / (np.sqrt(vhat) + eps)
    return t


def train_steps(theta, m, v, t, dims, act, omega0, x, targets, nsteps, lr, beta1, beta2, eps, loss_out):
    """Run ``nsteps`` full-batch Adam updates in place.

    ``loss_out[i]`` receives the pre-update loss of step ``i``.  Stops early
    when the loss goes non-finite and reports the number of completed steps.
    """
    done = 0
    for i in range(nsteps):
        loss, grad = loss_and_grad(theta, dims, act, omega0, x, targets)
        loss_out[i] = loss
        if not math.isfinite(loss):
            break
        t = adam_step(theta, grad, m, v, t, lr, beta1, beta2, eps)
        done += 1
    return done, t

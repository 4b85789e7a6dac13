"""Differentiable operations used by the model.

All ops take and return :class:`Tensor`. Shapes follow numpy conventions with
an arbitrary number of leading batch dimensions; the sequence axis is -2 and
the channel axis is -1 wherever a sequence is involved.
"""

from __future__ import annotations

import numpy as np
from scipy import special

from netconv.tensor.core import Tensor, as_tensor, make_node

LN_EPS = 1e-5


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _check_broadcast(a: Tensor, b: Tensor, name: str):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ValueError(f"{name}: shape mismatch {a.shape} vs {b.shape}") from None


def add(a, b) -> Tensor:
    a = as_tensor(a)
    b = as_tensor(b, like=a)
    _check_broadcast(a, b, "add")
    sa, sb = a.shape, b.shape
    return make_node(a.data + b.data, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def mul(a, b) -> Tensor:
    """Elementwise product (with trailing-axis broadcasting)."""
    a = as_tensor(a)
    b = as_tensor(b, like=a)
    _check_broadcast(a, b, "mul")
    ad, bd = a.data, b.data

    def back(g):
        return (
            _unbroadcast(g * bd, ad.shape) if a.requires_grad else None,
            _unbroadcast(g * ad, bd.shape) if b.requires_grad else None,
        )

    return make_node(ad * bd, (a, b), back)


elementwise_mul = mul


def sum_all(x: Tensor) -> Tensor:
    return make_node(np.asarray(x.data.sum(), dtype=x.dtype), (x,), lambda g: (np.broadcast_to(g, x.shape).copy(),))


def sigmoid(x: Tensor) -> Tensor:
    y = special.expit(x.data)
    return make_node(y, (x,), lambda g: (g * y * (1.0 - y),))


def relu(x: Tensor) -> Tensor:
    pos = x.data > 0
    return make_node(np.where(pos, x.data, 0).astype(x.dtype), (x,), lambda g: (g * pos,))


_SQRT1_2 = np.sqrt(0.5)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def gelu(x: Tensor) -> Tensor:
    """Exact (erf-based) GELU."""
    xd = x.data
    cdf = 0.5 * (1.0 + special.erf(xd * _SQRT1_2))
    y = (xd * cdf).astype(x.dtype)

    def back(g):
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * xd * xd)
        return ((g * (cdf + xd * pdf)).astype(x.dtype),)

    return make_node(y, (x,), back)


def softmax(x: Tensor) -> Tensor:
    """Softmax over the last axis, max-shifted for stability."""
    z = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=-1, keepdims=True)

    def back(g):
        return (y * (g - (g * y).sum(axis=-1, keepdims=True)),)

    return make_node(y, (x,), back)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = LN_EPS) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then scale and shift."""
    xd = x.data
    d = xd.shape[-1]
    mu = xd.mean(axis=-1, keepdims=True)
    xc = xd - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gain.data + bias.data

    def back(g):
        gx = gg = gb = None
        if x.requires_grad:
            gh = g * gain.data
            gx = inv * (gh - gh.mean(axis=-1, keepdims=True) - xhat * (gh * xhat).sum(axis=-1, keepdims=True) / d)
        if gain.requires_grad:
            gg = (g * xhat).reshape(-1, d).sum(axis=0)
        if bias.requires_grad:
            gb = g.reshape(-1, d).sum(axis=0)
        return gx, gg, gb

    return make_node(out, (x, gain, bias), back)


def embedding_lookup(table: Tensor, ids) -> Tensor:
    """Rows of ``table`` selected by integer ``ids`` (any shape)."""
    ids = np.asarray(ids)
    vocab = table.shape[0]
    if ids.size and (ids.min() < 0 or ids.max() >= vocab):
        bad = int(ids.max()) if ids.max() >= vocab else int(ids.min())
        raise IndexError(f"token id {bad} out of range for vocabulary of {vocab}")
    out = table.data[ids]

    def back(g):
        grad = np.zeros_like(table.data)
        np.add.at(grad, ids.reshape(-1), g.reshape(-1, table.shape[1]))
        return (grad,)

    return make_node(out, (table,), back)


def depthwise_conv(x: Tensor, kernel: Tensor) -> Tensor:
    """Per-channel 1-D convolution with windows starting at each position.

    ``out[..., t, c] = sum_i kernel[c, i] * x[..., t + i, c]`` where reads past
    the end of the sequence see zeros, so the output keeps the input length.
    """
    xd, kd = x.data, kernel.data
    n = xd.shape[-2]
    k = kd.shape[1]
    if kd.shape[0] != xd.shape[-1]:
        raise ValueError(f"depthwise_conv: kernel has {kd.shape[0]} channels, input has {xd.shape[-1]}")
    out = np.zeros_like(xd)
    for i in range(min(k, n)):
        out[..., : n - i, :] += xd[..., i:, :] * kd[:, i]

    def back(g):
        gx = gk = None
        if x.requires_grad:
            gx = np.zeros_like(xd)
            for i in range(min(k, n)):
                gx[..., i:, :] += g[..., : n - i, :] * kd[:, i]
        if kernel.requires_grad:
            gk = np.zeros_like(kd)
            lead = xd.shape[-1]
            for i in range(min(k, n)):
                gk[:, i] = (g[..., : n - i, :] * xd[..., i:, :]).reshape(-1, lead).sum(axis=0)
        return gx, gk

    return make_node(out, (x, kernel), back)


def scored_depthwise_conv(x: Tensor, raw_weights: Tensor) -> Tensor:
    """Depthwise convolution whose per-channel kernel is ``softmax(raw_weights[c])``."""
    return depthwise_conv(x, softmax(raw_weights))


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None, transpose_weight: bool = False) -> Tensor:
    """``x @ W + b`` with ``W`` of shape (a, b), or (b, a) when ``transpose_weight``."""
    xd, wd = x.data, weight.data
    w = wd.T if transpose_weight else wd
    if xd.shape[-1] != w.shape[0]:
        raise ValueError(f"linear: input width {xd.shape[-1]} does not match weight {wd.shape}")
    out = xd @ w
    if bias is not None:
        out += bias.data
    parents = (x, weight) if bias is None else (x, weight, bias)

    def back(g):
        a = xd.shape[-1]
        gx = g @ w.T if x.requires_grad else None
        gw = None
        if weight.requires_grad:
            g2 = g.reshape(-1, g.shape[-1])
            x2 = xd.reshape(-1, a)
            gw = g2.T @ x2 if transpose_weight else x2.T @ g2
        grads = [gx, gw]
        if bias is not None:
            grads.append(g.reshape(-1, g.shape[-1]).sum(axis=0) if bias.requires_grad else None)
        return tuple(grads)

    return make_node(out, parents, back)


def gather_positions(x: Tensor, batch_index, positions) -> Tensor:
    """Rows ``x[batch_index[j], positions[j]]`` of a (B, N, d) tensor as (M, d)."""
    bi = np.asarray(batch_index)
    pos = np.asarray(positions)
    out = x.data[bi, pos]

    def back(g):
        grad = np.zeros_like(x.data)
        np.add.at(grad, (bi, pos), g)
        return (grad,)

    return make_node(out, (x,), back)


def _check_mask(mask: np.ndarray):
    if not mask.any(axis=-1).all():
        raise ValueError("pooling needs at least one valid position per sequence")


def max_pool_over_sequence(x: Tensor, valid_mask) -> Tensor:
    """Channel-wise max over valid sequence positions: (..., N, d) -> (..., d)."""
    mask = np.asarray(valid_mask, dtype=bool)
    _check_mask(mask)
    masked = np.where(mask[..., None], x.data, -np.inf)
    idx = masked.argmax(axis=-2)
    out = np.take_along_axis(x.data, idx[..., None, :], axis=-2)[..., 0, :]

    def back(g):
        grad = np.zeros_like(x.data)
        np.put_along_axis(grad, idx[..., None, :], g[..., None, :], axis=-2)
        return (grad,)

    return make_node(out, (x,), back)


def mean_pool_over_sequence(x: Tensor, valid_mask) -> Tensor:
    mask = np.asarray(valid_mask, dtype=bool)
    _check_mask(mask)
    w = mask.astype(x.dtype)
    count = w.sum(axis=-1, keepdims=True)
    out = (x.data * w[..., None]).sum(axis=-2) / count

    def back(g):
        return ((g / count)[..., None, :] * w[..., None],)

    return make_node(out, (x,), back)


def cross_entropy(logits: Tensor, targets) -> Tensor:
    """Mean over rows of ``-log softmax(logits)[target]`` (log-sum-exp stabilized)."""
    t = np.asarray(targets)
    m, v = logits.shape
    if m == 0:
        raise ValueError("cross_entropy over zero rows")
    if t.shape != (m,):
        raise ValueError(f"cross_entropy: {m} rows but targets of shape {t.shape}")
    if t.min() < 0 or t.max() >= v:
        raise IndexError(f"cross_entropy: target outside [0, {v})")
    rows = np.arange(m)
    e = logits.data - logits.data.max(axis=-1, keepdims=True)
    picked = e[rows, t].copy()
    np.exp(e, out=e)
    s = e.sum(axis=-1, keepdims=True)
    loss = (np.log(s[:, 0]) - picked).mean()

    def back(g):
        p = e / s
        p[rows, t] -= 1.0
        p *= g / m
        return (p,)

    return make_node(np.asarray(loss, dtype=logits.dtype), (logits,), back)

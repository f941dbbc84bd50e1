"""Forward/backward pairs for the decoder building blocks.

Every forward returns ``(output, cache)``; the matching backward takes the
upstream gradient and that cache. Parameter gradients are only produced where
some trainable tensor can receive them (LoRA factors, projector weights).
"""
from __future__ import annotations

import math

import numpy as np

_GELU_C = math.sqrt(2.0 / math.pi)


def layer_norm(x, g, b, eps=1e-5):
    mu = x.mean(-1, keepdims=True)
    xc = x - mu
    rstd = 1.0 / np.sqrt((xc * xc).mean(-1, keepdims=True) + eps)
    xhat = xc * rstd
    return xhat * g + b, (xhat, rstd, g)


def layer_norm_backward(dy, cache):
    xhat, rstd, g = cache
    dxhat = dy * g
    return rstd * (dxhat - dxhat.mean(-1, keepdims=True) - xhat * (dxhat * xhat).mean(-1, keepdims=True))


def gelu(x):
    t = np.tanh(_GELU_C * (x + 0.044715 * x ** 3))
    return 0.5 * x * (1.0 + t), (x, t)


def gelu_backward(dy, cache):
    x, t = cache
    dt = _GELU_C * (1.0 + 3 * 0.044715 * x * x)
    return dy * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * dt)


def linear(x, W, b=None, lora=None, scale=0.0):
    """``x @ W (+ b)`` plus the low-rank residual ``scale * x A^T B^T``.

    ``lora`` is ``(A, B)`` with A: rank x in, B: out x rank, or None.
    """
    y = x @ W
    if b is not None:
        y = y + b
    u = None
    if lora is not None:
        A, B = lora
        u = x @ A.T
        y = y + scale * (u @ B.T)
    return y, (x, u)


def linear_backward(dy, cache, W, lora=None, scale=0.0, want_input=True):
    """Returns ``(dx, dA, dB)``; dA/dB are None without an adapter."""
    x, u = cache
    dA = dB = None
    dx = dy @ W.T if want_input else None
    if lora is not None:
        A, B = lora
        d2 = dy.reshape(-1, dy.shape[-1])
        du = scale * (d2 @ B)
        dA = du.T @ x.reshape(-1, x.shape[-1])
        dB = scale * (d2.T @ u.reshape(-1, u.shape[-1]))
        if want_input:
            dx = dx + (du @ A).reshape(dx.shape)
    return dx, dA, dB


def causal_attention(q, k, v, n_heads):
    B, T, D = q.shape
    dh = D // n_heads

    def split(t):
        return t.reshape(B, T, n_heads, dh).transpose(0, 2, 1, 3)

    qh, kh, vh = split(q), split(k), split(v)
    scale = 1.0 / math.sqrt(dh)
    s = (qh @ kh.transpose(0, 1, 3, 2)) * scale
    s = np.where(np.triu(np.ones((T, T), dtype=bool), 1), -np.inf, s)
    s = s - s.max(-1, keepdims=True)
    e = np.exp(s)
    p = e / e.sum(-1, keepdims=True)
    out = (p @ vh).transpose(0, 2, 1, 3).reshape(B, T, D)
    return out, (qh, kh, vh, p, scale)


def causal_attention_backward(dout, cache):
    qh, kh, vh, p, scale = cache
    B, H, T, dh = qh.shape
    do = dout.reshape(B, T, H, dh).transpose(0, 2, 1, 3)
    dv = p.transpose(0, 1, 3, 2) @ do
    dp = do @ vh.transpose(0, 1, 3, 2)
    ds = p * (dp - (dp * p).sum(-1, keepdims=True)) * scale
    dq = ds @ kh
    dk = ds.transpose(0, 1, 3, 2) @ qh

    def merge(t):
        return t.transpose(0, 2, 1, 3).reshape(B, T, H * dh)

    return merge(dq), merge(dk), merge(dv)


def mlp(x, W1, b1, W2=None, b2=None):
    """One linear layer, or two with a GELU between them when W2 is given."""
    h = x @ W1 + b1
    if W2 is None:
        return h, (x, None, None)
    a, gc = gelu(h)
    return a @ W2 + b2, (x, a, gc)


def mlp_backward(dy, cache, W1, W2=None):
    x, a, gc = cache
    x2 = x.reshape(-1, x.shape[-1])
    grads = {}
    if W2 is None:
        dh = dy
    else:
        d2 = dy.reshape(-1, dy.shape[-1])
        grads["W2"] = a.reshape(-1, a.shape[-1]).T @ d2
        grads["b2"] = d2.sum(0)
        dh = gelu_backward(dy @ W2.T, gc)
    dh2 = dh.reshape(-1, dh.shape[-1])
    grads["W1"] = x2.T @ dh2
    grads["b1"] = dh2.sum(0)
    return dh @ W1.T, grads


def log_softmax(z):
    z = z - z.max(-1, keepdims=True)
    return z - np.log(np.exp(z).sum(-1, keepdims=True))

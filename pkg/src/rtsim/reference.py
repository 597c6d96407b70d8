"""Native-integer oracle for layers and whole models.

Everything here is plain numpy integer arithmetic with the same rounding rules as
the simulator (floored shifts, 32-bit wrap, sign-select ReLU), so simulator
outputs must match it bit for bit.
"""
from __future__ import annotations

import numpy as np

from .shift_mac import floor_shift


def wrap_bits(v, n: int = 32):
    v = np.asarray(v, dtype=np.int64) & ((1 << n) - 1)
    return np.where(v >> (n - 1) == 1, v - (1 << n), v)


def _windows(x, P, Q, U):
    """(C, D, E, P, Q) view of the input patches."""
    C, H, W = x.shape
    D, E = (H - P) // U + 1, (W - Q) // U + 1
    s = x.strides
    return np.lib.stride_tricks.as_strided(
        x, (C, D, E, P, Q), (s[0], s[1] * U, s[2] * U, s[1], s[2]), writeable=False)


def conv_fixed(x, w, U: int = 1):
    x = np.ascontiguousarray(x, dtype=np.int64)
    win = _windows(x, w.shape[2], w.shape[3], U)
    return np.einsum("cdepq,fcpq->fde", win, np.asarray(w, dtype=np.int64))


def conv_log(x, sign, exponent, is_zero, U: int = 1):
    """Σ floor(s·a·2^e) with every term floored on its own."""
    x = np.ascontiguousarray(x, dtype=np.int64)
    F, C, P, Q = sign.shape
    win = _windows(x, P, Q, U)
    out = np.zeros((F,) + win.shape[1:3], dtype=np.int64)
    for f in range(F):
        s = np.where(is_zero[f], 0, sign[f])[:, None, None]
        t = floor_shift(win * s.reshape(C, 1, 1, P, Q), exponent[f].reshape(C, 1, 1, P, Q))
        out[f] = t.sum(axis=(0, 3, 4))
    return out


def fc_fixed(x, w):
    return np.asarray(w, dtype=np.int64) @ np.asarray(x, dtype=np.int64)


def fc_log(x, sign, exponent, is_zero):
    x = np.asarray(x, dtype=np.int64)
    s = np.where(is_zero, 0, sign)
    return floor_shift(s * x[None, :], exponent).sum(axis=1)


def relu(v):
    return np.where(np.asarray(v) < 0, 0, v)


def requantize(v, shift: int, n_bits: int):
    """Floored right shift and clamp into the signed n_bits activation range."""
    m = (1 << (n_bits - 1)) - 1
    return np.clip(np.asarray(v, dtype=np.int64) >> shift, -m, m)


def pool(x, size: int, kind: str):
    C, H, W = x.shape
    if H % size or W % size:
        raise ValueError("pool window must divide the input")
    v = np.asarray(x, dtype=np.int64).reshape(C, H // size, size, W // size, size)
    if kind == "max":
        return v.max(axis=(2, 4))
    if kind != "avg":
        raise ValueError(f"unknown pooling {kind!r}")
    n = size * size
    sh = max(0, round(np.log2(n)))
    return v.sum(axis=(2, 4)) >> sh


def batchnorm(x, mu, gamma_fixed, beta, frac_bits: int, n_bits: int):
    """((x - μ)·g >> f) + β per channel, clamped to the activation range."""
    x = np.asarray(x, dtype=np.int64)
    shp = (-1,) + (1,) * (x.ndim - 1)
    mu, g, b = (np.asarray(a, dtype=np.int64).reshape(shp) for a in (mu, gamma_fixed, beta))
    m = (1 << (n_bits - 1)) - 1
    return np.clip((((x - mu) * g) >> frac_bits) + b, -m, m)


def layer_reference(layer, x):
    """Apply one model layer (see ``system.model``) with native integers."""
    kind = layer.kind
    if kind == "flatten":
        return np.asarray(x).reshape(-1)
    if kind == "pool":
        return pool(x, layer.size, layer.pool)
    if kind == "bn":
        return batchnorm(x, layer.mu, layer.gamma, layer.beta, layer.frac_bits, layer.act_bits)
    if kind == "conv":
        if layer.log:
            acc = conv_log(x, *layer.log_fields, U=layer.stride)
        else:
            acc = conv_fixed(x, layer.weights, U=layer.stride)
        acc = acc + np.asarray(layer.bias, dtype=np.int64)[:, None, None]
    elif kind == "fc":
        acc = fc_log(x, *layer.log_fields) if layer.log else fc_fixed(x, layer.weights)
        acc = acc + np.asarray(layer.bias, dtype=np.int64)
    else:
        raise ValueError(f"unknown layer kind {kind!r}")
    acc = wrap_bits(acc)
    if not layer.relu:
        return acc
    return requantize(relu(acc), layer.shift, layer.act_bits)


def reference_inference(model, x, trace: list | None = None):
    for layer in model.layers:
        x = layer_reference(layer, x)
        if trace is not None:
            trace.append(x)
    return x

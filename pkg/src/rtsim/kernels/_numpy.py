"""Vectorized numpy implementations of the bit-serial kernels.

Every kernel walks the same cycle schedule as its numba twin in ``_numba.py`` and
returns identical results, counters and final MTJ states.  Lanes (the first axis)
are independent; the loops run over cycles and adder instances.
"""
from __future__ import annotations

import numpy as np

# input MTJs per full adder: a, ~a, b, ~b, c, ~c and a second c for the sum stage
W_A, W_B, W_C = 2, 2, 3


def _bits(x: np.ndarray, width: int) -> np.ndarray:
    return ((x[..., None] >> np.arange(width, dtype=np.int64)) & 1).astype(np.int8)


def _from_bits(bits: np.ndarray) -> np.ndarray:
    """Two's complement value of an LSB-first bit array along the last axis."""
    width = bits.shape[-1]
    w = np.left_shift(np.int64(1), np.arange(width, dtype=np.int64))
    v = (bits.astype(np.int64) * w).sum(axis=-1)
    return np.where(bits[..., -1] == 1, v - (np.int64(1) << width), v)


def _toggles(seq: np.ndarray, init: np.ndarray) -> tuple[int, np.ndarray]:
    """Transitions along the last axis, starting from ``init``; returns (count, last)."""
    prev = np.concatenate([init[..., None], seq[..., :-1]], axis=-1)
    return int((seq != prev).sum()), seq[..., -1].copy()


def _toggles_masked(seq: np.ndarray, mask: np.ndarray, init: np.ndarray):
    """Like ``_toggles`` but only clocked cycles (``mask``) update the MTJ."""
    T = seq.shape[-1]
    idx = np.where(mask, np.arange(T), -1)
    idx = np.maximum.accumulate(idx, axis=-1)
    filled = np.take_along_axis(seq, np.clip(idx, 0, None), axis=-1)
    filled = np.where(idx >= 0, filled, init[..., None])
    return _toggles(filled, init)


def _fa_stream(a: np.ndarray, b: np.ndarray, c0: np.ndarray):
    """Bit-serial full adder over the last axis. Returns (sum, carry_in_stream)."""
    T = a.shape[-1]
    s = np.empty_like(a)
    cs = np.empty_like(a)
    c = c0.astype(np.int8).copy()
    for t in range(T):
        at, bt = a[..., t], b[..., t]
        cs[..., t] = c
        s[..., t] = at ^ bt ^ c
        c = (at & bt) | (c & (at ^ bt))
    return s, cs, c


def _fa_toggles(a, b, cs, state):
    ta, la = _toggles(a, state[..., 0])
    tb, lb = _toggles(b, state[..., 1])
    tc, lc = _toggles(cs, state[..., 2])
    state[..., 0], state[..., 1], state[..., 2] = la, lb, lc
    return W_A * ta + W_B * tb + W_C * tc


def serial_add(x, y, cin, width, extend, state):
    """Bit-serial two's complement add of sign-extended ``width``-bit operands.

    Returns (sum, counts[ops, toggles]).  The sum is ``width + 1`` bits when
    ``extend`` is set (exact), otherwise it wraps to ``width`` bits.
    """
    x = np.asarray(x, dtype=np.int64)
    m = x.shape[0]
    counts = np.zeros(2, dtype=np.int64)
    if m == 0:
        return np.zeros(0, dtype=np.int64), counts
    a = _bits(x, width)
    b = _bits(np.asarray(y, dtype=np.int64), width)
    s, cs, c = _fa_stream(a, b, np.asarray(cin, dtype=np.int8))
    counts[0] = m * width
    counts[1] = _fa_toggles(a, b, cs, state)
    if extend:
        top = a[:, -1] ^ b[:, -1] ^ c
        s = np.concatenate([s, top[:, None]], axis=1)
    return _from_bits(s), counts


def booth_controls(w, n):
    """Per-block (zero, comp, incr, ls) for radix-4 recoding of ``n``-bit ``w``."""
    w = np.asarray(w, dtype=np.int64)
    nb = n // 2
    wb = _bits(w, n)
    pad = np.concatenate([np.zeros(w.shape + (1,), np.int8), wb], axis=-1)
    b0 = pad[..., 0:n:2][..., :nb]
    b1 = pad[..., 1:n + 1:2][..., :nb]
    b2 = pad[..., 2:n + 1:2][..., :nb]
    zero = (b2 & b1 & b0) | ((1 - b2) & (1 - b1) & (1 - b0))
    comp = b2
    incr = comp & (1 - zero)
    ls = (b2 & (1 - b1) & (1 - b0)) | ((1 - b2) & b1 & b0)
    return zero.astype(np.int8), comp.astype(np.int8), incr.astype(np.int8), ls.astype(np.int8)


def booth(a, w, n, state_gen, state_acc):
    """Radix-4 Booth multiply, one lane per (a, w) pair.

    Partial products are n+1 bits (±a or 0); the x2 of "left shift" blocks is
    applied as one extra alignment position.  Returns (products, counts) with
    counts = [gen_ops, acc_ops, toggles, pp_writes, pp_reads, pp_shifts, align_shifts].
    """
    a = np.asarray(a, dtype=np.int64)
    m = a.shape[0]
    nb = n // 2
    counts = np.zeros(7, dtype=np.int64)
    if m == 0:
        return np.zeros(0, dtype=np.int64), counts
    zero, comp, incr, ls = booth_controls(w, n)
    # generation: multiplicand streamed for n cycles, MSB held one more cycle
    src = _bits(a, n)
    src = np.concatenate([src, src[:, -1:]], axis=1)  # (m, n+1)
    x = np.where(zero[..., None] == 1, 0, src[:, None, :] ^ comp[..., None]).astype(np.int8)
    zeros = np.zeros_like(x)
    pp, cs, _ = _fa_stream(x, zeros, incr)
    tog = _fa_toggles(x, zeros, cs, state_gen)
    off = 2 * np.arange(nb)[None, :] + ls  # (m, nb)
    # accumulation: chain of nb bit-serial adders over 2n cycles
    L = 2 * n
    j = np.arange(L)[None, None, :] - off[..., None]
    aligned = np.where(j < 0, 0, np.take_along_axis(
        pp, np.clip(j, 0, n).reshape(m, nb, L), axis=2)).astype(np.int8)
    run = np.zeros((m, L), dtype=np.int8)
    for T in range(nb):
        s, cs, _ = _fa_stream(run, aligned[:, T, :], np.zeros(m, np.int8))
        tog += _fa_toggles(run, aligned[:, T, :], cs, state_acc[:, T, :])
        run = s
    counts[0] = m * nb * (n + 1)
    counts[1] = m * nb * L
    counts[2] = tog
    counts[3] = m * nb * (n + 1)
    so = int(off.sum())
    counts[4] = so + m * nb * (n + 1)
    counts[5] = m * nb * 4 * n + 2 * so
    counts[6] = so
    return _from_bits(run), counts


def shift_window(v, lo, n_b):
    return (v >= lo) & (v < lo + n_b)


def shift_mac(acts, dists, neg, zero, n_b, D, width, lo, g, state_tree, state_comp):
    """Counter-controlled shift-and-add of k tracks per lane.

    acts/dists/neg/zero are (m, k).  Returns (sums, counts) with
    counts = [tree_ops, comp_ops, toggles, reads, shifts].
    """
    acts = np.asarray(acts, dtype=np.int64)
    m, k = acts.shape
    counts = np.zeros(5, dtype=np.int64)
    out_bits = n_b + D + g
    if m == 0:
        return np.zeros(0, dtype=np.int64), counts
    T_end = n_b + 2 * D + g
    mod = 1 << width
    hi = lo + n_b - 1
    c0 = (hi + 1 + D + np.asarray(dists, np.int64)) % mod
    t = np.arange(1, T_end + 1)
    v = (c0[..., None] - t) % mod
    en = shift_window(v, lo, n_b) & (np.asarray(zero)[..., None] == 0)
    pos = np.cumsum(en, axis=-1)
    counts[3] = counts[4] = int(en.sum())
    abits = _bits(acts, n_b)
    bit = np.take_along_axis(abits, np.clip(pos - 1, 0, n_b - 1), axis=-1)
    bit = np.where(pos == 0, 0, bit).astype(np.int8)
    # complement stage on negative tracks, clocked once the first bit arrives
    negm = np.asarray(neg)[..., None].astype(bool)
    run = (pos >= 1) & negm
    x = np.where(run, 1 - bit, 0).astype(np.int8)
    comp_out = np.zeros_like(x)
    cs = np.zeros_like(x)
    c = np.ones((m, k), dtype=np.int8)
    for i in range(T_end):
        r = run[..., i]
        xi = x[..., i]
        cs[..., i] = c
        comp_out[..., i] = np.where(r, xi ^ c, 0)
        c = np.where(r, xi & c, c)
    tog = 0
    ta, la = _toggles_masked(x, run, state_comp[..., 0])
    tb, lb = _toggles_masked(np.zeros_like(x), run, state_comp[..., 1])
    tc, lc = _toggles_masked(cs, run, state_comp[..., 2])
    state_comp[..., 0], state_comp[..., 1], state_comp[..., 2] = la, lb, lc
    tog += W_A * ta + W_B * tb + W_C * tc
    counts[1] = int(run.sum())
    stream = np.where(negm, comp_out, bit)[..., D:]  # tree ignores t <= D
    res, tree_ops, ttog = _tree(stream, state_tree)
    counts[0] = tree_ops
    counts[2] = tog + ttog
    return _from_bits(res[:, :out_bits]), counts


def _tree(streams, state):
    """Balanced binary tree of bit-serial adders over (m, k, T) streams."""
    m, k, T = streams.shape
    nodes = [streams[:, i, :] for i in range(k)]
    node = 0
    tog = 0
    while len(nodes) > 1:
        nxt = []
        for i in range(0, len(nodes) - 1, 2):
            a, b = nodes[i], nodes[i + 1]
            s, cs, _ = _fa_stream(a, b, np.zeros(m, np.int8))
            tog += _fa_toggles(a, b, cs, state[:, node, :])
            node += 1
            nxt.append(s)
        if len(nodes) % 2:
            nxt.append(nodes[-1])
        nodes = nxt
    return nodes[0], (k - 1) * m * T, tog


def tree_add(x, width, g, state):
    """Sum k sign-extended ``width``-bit words per lane; exact ``width + g`` bits."""
    x = np.asarray(x, dtype=np.int64)
    m, k = x.shape
    counts = np.zeros(2, dtype=np.int64)
    if m == 0:
        return np.zeros(0, dtype=np.int64), counts
    streams = _bits(x, width + g)
    res, ops, tog = _tree(streams, state)
    counts[0], counts[1] = ops, tog
    return _from_bits(res), counts

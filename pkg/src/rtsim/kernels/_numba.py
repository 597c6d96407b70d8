"""Scalar-loop kernels compiled with numba; same contract as ``_numpy.py``."""
from __future__ import annotations

import numpy as np
from numba import njit

W_A, W_B, W_C = 2, 2, 3


@njit(cache=True)
def _signed(v, nbits):
    if (v >> (nbits - 1)) & 1:
        return v - (np.int64(1) << nbits)
    return v


@njit(cache=True)
def _fa(a, b, c, st):
    """One full-adder cycle; updates the 3-entry MTJ state and returns
    (sum, carry, weighted toggles)."""
    tog = W_A * (a != st[0]) + W_B * (b != st[1]) + W_C * (c != st[2])
    st[0] = a
    st[1] = b
    st[2] = c
    return a ^ b ^ c, (a & b) | (c & (a ^ b)), tog


@njit(cache=True)
def serial_add(x, y, cin, width, extend, state):
    m = x.shape[0]
    out = np.zeros(m, dtype=np.int64)
    counts = np.zeros(2, dtype=np.int64)
    tog = 0
    for i in range(m):
        c = np.int64(cin[i])
        s = np.int64(0)
        st = state[i]
        for t in range(width):
            a = (x[i] >> t) & 1
            b = (y[i] >> t) & 1
            sb, c, dt = _fa(a, b, c, st)
            tog += dt
            s |= sb << t
        if extend:
            top = ((x[i] >> (width - 1)) & 1) ^ ((y[i] >> (width - 1)) & 1) ^ c
            s |= top << width
            out[i] = _signed(s, width + 1)
        else:
            out[i] = _signed(s, width)
    counts[0] = m * width
    counts[1] = tog
    return out, counts


@njit(cache=True)
def booth(a, w, n, state_gen, state_acc):
    m = a.shape[0]
    nb = n // 2
    L = 2 * n
    out = np.zeros(m, dtype=np.int64)
    counts = np.zeros(7, dtype=np.int64)
    pp = np.zeros((nb, n + 1), dtype=np.int64)
    off = np.zeros(nb, dtype=np.int64)
    carry = np.zeros(nb, dtype=np.int64)
    tog = 0
    so = 0
    for i in range(m):
        ai = a[i]
        wi = w[i]
        for T in range(nb):
            b0 = 0 if T == 0 else (wi >> (2 * T - 1)) & 1
            b1 = (wi >> (2 * T)) & 1
            b2 = (wi >> (2 * T + 1)) & 1
            zero = (b2 & b1 & b0) | ((1 - b2) & (1 - b1) & (1 - b0))
            comp = b2
            incr = comp & (1 - zero)
            ls = (b2 & (1 - b1) & (1 - b0)) | ((1 - b2) & b1 & b0)
            c = incr
            st = state_gen[i, T]
            for t in range(n + 1):
                src = (ai >> (t if t < n else n - 1)) & 1
                x = 0 if zero else src ^ comp
                sb, c, dt = _fa(x, 0, c, st)
                tog += dt
                pp[T, t] = sb
            off[T] = 2 * T + ls
            so += off[T]
            carry[T] = 0
        s = np.int64(0)
        for t in range(L):
            run = 0
            for T in range(nb):
                j = t - off[T]
                if j < 0:
                    bit = 0
                elif j > n:
                    bit = pp[T, n]
                else:
                    bit = pp[T, j]
                run, ct, dt = _fa(run, bit, carry[T], state_acc[i, T])
                carry[T] = ct
                tog += dt
            s |= np.int64(run) << t
        out[i] = _signed(s, L)
    counts[0] = m * nb * (n + 1)
    counts[1] = m * nb * L
    counts[2] = tog
    counts[3] = m * nb * (n + 1)
    counts[4] = so + m * nb * (n + 1)
    counts[5] = m * nb * 4 * n + 2 * so
    counts[6] = so
    return out, counts


@njit(cache=True)
def _tree_cycle(vals, k, carries, state):
    """Push one cycle of k input bits through the balanced tree; returns
    (output bit, toggles).  ``vals`` is clobbered."""
    node = 0
    tog = 0
    cnt = k
    while cnt > 1:
        j = 0
        for i in range(0, cnt - 1, 2):
            sb, ct, dt = _fa(vals[i], vals[i + 1], carries[node], state[node])
            carries[node] = ct
            tog += dt
            vals[j] = sb
            node += 1
            j += 1
        if cnt % 2:
            vals[j] = vals[cnt - 1]
            j += 1
        cnt = j
    return vals[0], tog


@njit(cache=True)
def shift_mac(acts, dists, neg, zero, n_b, D, width, lo, g, state_tree, state_comp):
    m, k = acts.shape
    counts = np.zeros(5, dtype=np.int64)
    out = np.zeros(m, dtype=np.int64)
    out_bits = n_b + D + g
    T_end = n_b + 2 * D + g
    mod = np.int64(1) << width
    hi = lo + n_b - 1
    pos = np.zeros(k, dtype=np.int64)
    cc = np.zeros(k, dtype=np.int64)
    c0 = np.zeros(k, dtype=np.int64)
    vals = np.zeros(k, dtype=np.int64)
    carries = np.zeros(max(k - 1, 1), dtype=np.int64)
    tog = 0
    for i in range(m):
        for j in range(k):
            pos[j] = 0
            cc[j] = 1
            c0[j] = (hi + 1 + D + dists[i, j]) % mod
        for q in range(k - 1):
            carries[q] = 0
        s = np.int64(0)
        for t in range(1, T_end + 1):
            for j in range(k):
                v = (c0[j] - t) % mod
                if zero[i, j] == 0 and v >= lo and v < lo + n_b:
                    pos[j] += 1
                    counts[3] += 1
                    counts[4] += 1
                if pos[j] == 0:
                    bit = 0
                else:
                    bit = (acts[i, j] >> (min(pos[j], n_b) - 1)) & 1
                if neg[i, j] and pos[j] >= 1:
                    x = 1 - bit
                    sb, ct, dt = _fa(x, 0, cc[j], state_comp[i, j])
                    cc[j] = ct
                    tog += dt
                    counts[1] += 1
                    bit = sb
                elif neg[i, j]:
                    bit = 0
                vals[j] = bit
            if t > D:
                ob, dt = _tree_cycle(vals, k, carries, state_tree[i])
                tog += dt
                s |= np.int64(ob) << (t - 1 - D)
        out[i] = _signed(s, out_bits)
    counts[0] = (k - 1) * m * (T_end - D)
    counts[2] = tog
    return out, counts


@njit(cache=True)
def tree_add(x, width, g, state):
    m, k = x.shape
    counts = np.zeros(2, dtype=np.int64)
    out = np.zeros(m, dtype=np.int64)
    vals = np.zeros(k, dtype=np.int64)
    carries = np.zeros(max(k - 1, 1), dtype=np.int64)
    nbits = width + g
    tog = 0
    for i in range(m):
        for q in range(k - 1):
            carries[q] = 0
        s = np.int64(0)
        for t in range(nbits):
            for j in range(k):
                vals[j] = (x[i, j] >> t) & 1
            ob, dt = _tree_cycle(vals, k, carries, state[i])
            tog += dt
            s |= np.int64(ob) << t
        out[i] = _signed(s, nbits)
    counts[0] = (k - 1) * m * nbits
    counts[1] = tog
    return out, counts

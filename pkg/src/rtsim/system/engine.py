"""Layer execution on the mapped hierarchy.

Each mat group owns a subset of input channels and walks its terms (c, p, q)
weight by weight.  A term multiplies one weight with the activations it meets in
every output position; the product lands in the group's single running partial sum
per output.  After all groups finish, the bank adder tree sums the group partial
sums, the bias is added, ReLU selects on the sign bit and a right shift rescales
the result to the activation width.

Values are computed by the bit-serial kernels, so every sum and product below is
the one the simulated hardware produces.  Memory events are charged per MU access.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..alu import record_adders, serial_add_many, wrap
from ..booth import BoothUnitState, booth_latency, booth_multiply
from ..config import SimConfig, ceil_log2
from ..ledger import EnergyLedger, LatencyLedger
from ..quantizer import log_to_fixed
from ..shift_mac import ShiftMacConfig, ShiftUnitState, charge_shift_counts, growth_bits
from .placement import LayerPlacement, LayerShape, place_conv_layer, place_fc_layer

TREE_FANIN = 16


@dataclass
class BatchNormParams:
    mu: np.ndarray
    gamma: np.ndarray  # fixed point, ``frac_bits`` fractional bits
    beta: np.ndarray
    frac_bits: int
    var: np.ndarray | None = None

    def __post_init__(self):
        if self.var is not None and np.any(np.asarray(self.var) <= 0):
            raise ValueError("variance must be positive")

    @classmethod
    def from_float(cls, mu, var, gamma, beta, frac_bits: int = 6, eps: float = 0.0):
        var = np.asarray(var, dtype=float)
        if np.any(var <= 0):
            raise ValueError("variance must be positive")
        g = np.asarray(gamma, dtype=float) / np.sqrt(var + eps)
        gq = np.round(g * (1 << frac_bits)).astype(np.int64)
        return cls(np.round(mu).astype(np.int64), gq, np.round(beta).astype(np.int64),
                   frac_bits, var)


def _even(n: int) -> int:
    return n + (n & 1)


def _mem(ledger, reads=0, writes=0, shifts=0):
    if ledger is None:
        return
    ledger.add("rt_read", reads)
    ledger.add("rt_write", writes)
    ledger.add("rt_shift", shifts)


class _Weights:
    """Per-term weight vectors over filters, fixed point or power-of-two."""

    def __init__(self, w=None, log_fields=None, d_max: int = 8, bits: int = 8):
        self.log = log_fields is not None
        self.bits = bits
        self.d_max = d_max
        if self.log:
            s, e, z = (np.asarray(a) for a in log_fields)
            self.sign, self.exp, self.zero = s.astype(np.int64), e.astype(np.int64), z.astype(bool)
            self.fixed, self.fixed_bits = log_to_fixed(s, e, z, d_max)
        else:
            self.fixed = np.asarray(w, dtype=np.int64)
            self.fixed_bits = bits
        if self.fixed.ndim == 2:  # fc: (N, M) -> (N, M, 1, 1)
            self._reshape(lambda a: a[:, :, None, None])

    def _reshape(self, fn):
        self.fixed = fn(self.fixed)
        if self.log:
            self.sign, self.exp, self.zero = fn(self.sign), fn(self.exp), fn(self.zero)


def _group_terms(pl: LayerPlacement, chans):
    P, Q = pl.shape.P, pl.shape.Q
    terms = [(c, p, q) for c in chans for p in range(P) for q in range(Q)]
    # column parity of the term decides the subarray it reads from
    par = [(j % 2) if pl.fc else q % 2 for j, (c, p, q) in enumerate(terms)]
    return terms, par


def _pairs(par):
    """Group consecutive terms into shift-MAC passes of two when their subarrays differ."""
    out, i = [], 0
    while i < len(par):
        if i + 1 < len(par) and par[i] != par[i + 1]:
            out.append((i, i + 1))
            i += 2
        else:
            out.append((i,))
            i += 1
    return out


def _access_schedule(pl: LayerPlacement, terms, n_b: int):
    """Walk one filter's MU accesses of a group; returns (accesses, stall cycles, conflicts).

    An MU needs n_b cycles to return to its home position after an access.  Moving
    to another MU hides that reset; touching the same MU again stalls.
    """
    sh = pl.shape
    t, stall, conflicts, n = 0, 0, 0, 0
    busy: dict = {}
    for c, p, q in terms:
        cols = [0] if pl.fc else [e * sh.U + q for e in range(sh.E)]
        for s in range(pl.blocks):
            slot = int(pl.slot_of[s, p]) if not pl.fc else 0
            for col in cols:
                mu = pl.mu_id(c, col, slot)
                start = max(t, busy.get(mu, 0))
                if start > t:
                    conflicts += 1
                    stall += start - t
                t = start + n_b
                busy[mu] = t + n_b
                n += 1
    return n, stall, conflicts


def _term_acts(x, c, p, q, sh: LayerShape):
    U = sh.U
    return x[c, p:p + U * (sh.D - 1) + 1:U, q:q + U * (sh.E - 1) + 1:U]


def _execute(x, weights: _Weights, bias, pl: LayerPlacement, cfg: SimConfig, engine: str,
             ledger: EnergyLedger | None, latency: LatencyLedger | None, act_bits: int,
             relu: bool, shift: int):
    sh = pl.shape
    sysc, model = cfg.system, cfg.adder
    acc = sysc.acc_bits
    n_b = act_bits
    F, D, E = sh.F, sh.D, sh.E
    x = np.asarray(x, dtype=np.int64).reshape(sh.C, sh.H, sh.W)
    if engine == "shift" and not weights.log:
        raise ValueError("the shift engine needs power-of-two weights")
    if engine == "booth":
        n_mul = _even(max(n_b, weights.fixed_bits))
        post = weights.d_max - 1 if weights.log else 0
        pass_lat = booth_latency(n_mul)["mac"]
    else:
        smc = ShiftMacConfig(n_b, weights.d_max, max_k=2)
        pass_lat = smc.latency()
    groups = [g for g in pl.groups if g]
    tile = pl.filters_per_tile
    group_psums = np.zeros((len(groups), F * D * E), dtype=np.int64)
    group_cycles = []
    for gi, chans in enumerate(groups):
        terms, par = _group_terms(pl, chans)
        n_acc, stall, conflicts = _access_schedule(pl, terms, n_b)
        passes = _pairs(par) if engine == "shift" else [(i,) for i in range(len(terms))]
        # accesses per pass = the accesses of its first term (a pair streams in parallel)
        acc_per_term = pl.blocks * (1 if pl.fc else E)
        units = sysc.multiplier_blocks_per_group
        mac_cycles = math.ceil(F * len(passes) * acc_per_term / units) * pass_lat
        group_cycles.append((mac_cycles, stall * F))
        if ledger is not None:
            ledger.tally("mu_access", n_acc * F)
            ledger.tally("reset_conflict", conflicts * F)
            ledger.tally("reset_hidden", (n_acc - conflicts) * F)
        for f0 in range(0, F, tile):
            f1 = min(F, f0 + tile)
            Ft = f1 - f0
            L = Ft * D * E
            psum = None
            add_state = kernels.new_state(L)
            if engine == "booth":
                bst = BoothUnitState.fresh(L, n_mul)
            else:
                sst = {1: ShiftUnitState.fresh(L, 1), 2: ShiftUnitState.fresh(L, 2)}
            for ps in passes:
                k = len(ps)
                a = np.empty((L, k), dtype=np.int64)
                for j, ti in enumerate(ps):
                    c, p, q = terms[ti]
                    a[:, j] = np.broadcast_to(_term_acts(x, c, p, q, sh), (Ft, D, E)).reshape(-1)
                    w_bits = weights.bits
                    # weight read: one word per filter in the tile
                    _mem(ledger, reads=Ft * w_bits, shifts=2 * Ft * w_bits)
                    n_access = Ft * pl.blocks * (1 if pl.fc else E)
                    _mem(ledger, shifts=2 * n_access * pl.tracks * n_b)
                if engine == "booth":
                    c, p, q = terms[ps[0]]
                    wl = np.repeat(weights.fixed[f0:f1, c, p, q], D * E)
                    _mem(ledger, reads=L * n_b)
                    prod = booth_multiply(a[:, 0], wl, n_mul, model, ledger, state=bst) >> post
                    val = prod
                else:
                    sel = [terms[ti] for ti in ps]
                    dist = np.stack([np.repeat(weights.exp[f0:f1, c, p, q], D * E) for c, p, q in sel], 1)
                    neg = np.stack([np.repeat(weights.sign[f0:f1, c, p, q] < 0, D * E) for c, p, q in sel], 1)
                    zero = np.stack([np.repeat(weights.zero[f0:f1, c, p, q], D * E) for c, p, q in sel], 1)
                    st = sst[k]
                    g = growth_bits(k)
                    val, cnt = kernels.shift_mac(a, dist, neg.astype(np.int8), zero.astype(np.int8),
                                                 n_b, smc.D, smc.counter_width, smc.window_lo, g,
                                                 st.tree, st.comp)
                    charge_shift_counts(ledger, model, cnt, L, n_b, memory=False)
                    _mem(ledger, reads=int(cnt[3]))
                if psum is None:
                    psum = wrap(val, acc)
                    _mem(ledger, writes=L * acc, shifts=2 * L * acc)
                else:
                    psum = serial_add_many(psum, val, acc, model, ledger, state=add_state)
                    _mem(ledger, reads=L * acc, writes=L * acc, shifts=2 * L * acc)
                if ledger is not None:
                    ledger.tally("psum_update", L)
            group_psums[gi, f0 * D * E:f1 * D * E] = psum
    if ledger is not None:
        # one running partial sum per output in each active group
        ledger.tally("psum_resident_max", 1)
    mac, stall = max(group_cycles)
    if latency is not None:
        latency.add("mac", mac)
        latency.add("stall", stall)
    total = adder_tree_reduce(group_psums.T, cfg, ledger, latency)
    return finish_outputs(total, bias, F, D, E, cfg, ledger, latency, act_bits, relu, shift)


def finish_outputs(total, bias, F, D, E, cfg, ledger, latency, act_bits, relu, shift):
    acc = cfg.system.acc_bits
    model = cfg.adder
    bias_l = np.repeat(np.asarray(bias, dtype=np.int64), D * E)
    out = serial_add_many(total, bias_l, acc, model, ledger)
    n_out = out.shape[0]
    _mem(ledger, reads=2 * n_out * acc, writes=n_out * acc, shifts=4 * n_out * acc)
    if latency is not None:
        latency.add("bias", acc)
    if relu:
        # sign-bit select, then a shifted read of the word rescales it
        m = (1 << (act_bits - 1)) - 1
        out = np.minimum(np.where(out < 0, 0, out) >> shift, m)
        if ledger is not None:
            ledger.tally("relu", n_out)
            ledger.tally("requant", n_out)
        _mem(ledger, reads=n_out * acc, writes=n_out * act_bits, shifts=2 * n_out * (acc + act_bits))
    return out.reshape(F, D, E)


def adder_tree_reduce(partial_sums, cfg: SimConfig | None = None,
                      ledger: EnergyLedger | None = None,
                      latency: LatencyLedger | None = None) -> np.ndarray:
    """Sum the per-group partial sums of each output with the bank adder tree.

    ``partial_sums`` is (outputs, groups) or a 1-D list for a single output.  More
    than 16 groups take several passes whose results are added in the destination mat.
    """
    cfg = cfg or SimConfig()
    acc = cfg.system.acc_bits
    ps = np.asarray(partial_sums, dtype=np.int64)
    single = ps.ndim == 1
    ps = np.atleast_2d(ps)
    m, k = ps.shape
    if k == 1:
        out = ps[:, 0].copy()
        return out[0] if single else out
    results = []
    for g0 in range(0, k, TREE_FANIN):
        chunk = ps[:, g0:g0 + TREE_FANIN]
        kk = chunk.shape[1]
        if kk == 1:
            results.append(chunk[:, 0])
            continue
        g = ceil_log2(kk)
        s, cnt = kernels.tree_add(chunk, acc, g, kernels.new_state(m, kk - 1))
        record_adders(ledger, cfg.adder, int(cnt[0]), int(cnt[1]))
        _mem(ledger, reads=m * kk * acc, shifts=2 * m * kk * acc)
        if latency is not None:
            latency.add("adder_tree", acc + g)
        if ledger is not None:
            ledger.tally("tree_pass", 1)
        results.append(wrap(s, acc))
    out = results[0]
    for r in results[1:]:
        # S(0) + S(1) accumulated in the destination mat
        out = serial_add_many(out, r, acc, cfg.adder, ledger)
        _mem(ledger, reads=2 * m * acc, writes=m * acc, shifts=4 * m * acc)
        if latency is not None:
            latency.add("adder_tree", acc)
    _mem(ledger, writes=m * acc, shifts=2 * m * acc)
    return out[0] if single else out


def run_conv(inputs, weights=None, bias=None, placement: LayerPlacement | None = None,
             engine: str = "booth", ledger: EnergyLedger | None = None,
             latency: LatencyLedger | None = None, cfg: SimConfig | None = None,
             act_bits: int = 8, weight_bits: int = 8, log_fields=None, d_max: int = 8,
             stride: int = 1, relu: bool = True, shift: int = 0,
             mat_groups: int | None = None) -> np.ndarray:
    """Convolution + bias + ReLU + rescale.  Weights are (F, C, P, Q) integers or
    ``log_fields`` = (sign, exponent, is_zero) arrays of that shape."""
    cfg = cfg or SimConfig()
    x = np.asarray(inputs, dtype=np.int64)
    wt = _Weights(weights, log_fields, d_max, weight_bits)
    F, C, P, Q = wt.fixed.shape
    if placement is None:
        shape = LayerShape(C, x.shape[1], x.shape[2], F, P, Q, stride)
        placement = place_conv_layer(shape, cfg, n_b=act_bits, engine=engine,
                                     mat_groups=mat_groups, weight_bits=weight_bits)
    if bias is None:
        bias = np.zeros(F, dtype=np.int64)
    return _execute(x, wt, bias, placement, cfg, engine, ledger, latency, act_bits, relu, shift)


def run_fc(inputs, weights=None, bias=None, cfg: SimConfig | None = None,
           ledger: EnergyLedger | None = None, latency: LatencyLedger | None = None,
           engine: str = "booth", act_bits: int = 8, weight_bits: int = 8, log_fields=None,
           d_max: int = 8, relu: bool = True, shift: int = 0,
           mat_groups: int | None = None) -> np.ndarray:
    """Fully connected layer on single-track words; weights are (N, M)."""
    cfg = cfg or SimConfig()
    x = np.asarray(inputs, dtype=np.int64).reshape(-1)
    wt = _Weights(weights, log_fields, d_max, weight_bits)
    N, M = wt.fixed.shape[:2]
    if x.shape[0] != M:
        raise ValueError(f"fc input has {x.shape[0]} values, weights expect {M}")
    pl = place_fc_layer(M, N, cfg, n_b=act_bits, engine=engine, mat_groups=mat_groups,
                        weight_bits=weight_bits)
    if bias is None:
        bias = np.zeros(N, dtype=np.int64)
    out = _execute(x.reshape(M, 1, 1), wt, bias, pl, cfg, engine, ledger, latency, act_bits,
                   relu, shift)
    return out.reshape(N)


def run_batchnorm(inputs, params: BatchNormParams, ledger: EnergyLedger | None = None,
                  latency: LatencyLedger | None = None, cfg: SimConfig | None = None,
                  act_bits: int = 8) -> np.ndarray:
    """((x - μ)·g >> f) + β per channel: a subtract, a Booth multiply and an add.

    Always on the Booth unit, whatever engine the surrounding layers use.
    """
    cfg = cfg or SimConfig()
    model = cfg.adder
    x = np.asarray(inputs, dtype=np.int64)
    C = x.shape[0]
    per = x[0].size
    flat = x.reshape(-1)
    rep = lambda v: np.repeat(np.asarray(v, dtype=np.int64).reshape(C), per)
    mu, g, beta = rep(params.mu), rep(params.gamma), rep(params.beta)
    m = (1 << (act_bits - 1)) - 1
    if np.any(np.abs(mu) > m):
        raise ValueError("batch-norm mean outside the activation range")
    n = flat.shape[0]
    # x + ~mu + 1
    diff = serial_add_many(flat, ~mu, act_bits, model, ledger, cin=1, extend=True)
    gbits = int(np.abs(g).max(initial=0)).bit_length() + 1
    nm = _even(max(act_bits + 1, gbits))
    prod = booth_multiply(diff, g, nm, model, ledger) >> params.frac_bits
    out = serial_add_many(prod, beta, 2 * nm, model, ledger, extend=True)
    out = np.clip(out, -m, m)
    _mem(ledger, reads=n * (act_bits * 2 + nm), writes=n * act_bits,
         shifts=2 * n * (act_bits * 2 + nm + act_bits))
    if ledger is not None:
        ledger.tally("bn_multiply", n)
        ledger.tally("bn_add", 2 * n)
    if latency is not None:
        units = cfg.system.mat_groups_per_bank * cfg.system.multiplier_blocks_per_group
        latency.add("batchnorm", math.ceil(n / units) * (act_bits + booth_latency(nm)["multiply"] + 2 * nm))
    return out.reshape(x.shape)


def run_pool(inputs, window: int = 2, kind: str = "avg", ledger: EnergyLedger | None = None,
             latency: LatencyLedger | None = None, cfg: SimConfig | None = None,
             act_bits: int = 8) -> np.ndarray:
    """Average pooling by sum and right shift, or max pooling by subtract and select."""
    cfg = cfg or SimConfig()
    model = cfg.adder
    x = np.asarray(inputs, dtype=np.int64)
    C, H, W = x.shape
    s = window
    if H % s or W % s:
        raise ValueError(f"pool window {s} does not divide {H}x{W}")
    k = s * s
    win = x.reshape(C, H // s, s, W // s, s).transpose(0, 1, 3, 2, 4).reshape(-1, k)
    m = win.shape[0]
    if kind == "avg":
        g = ceil_log2(k)
        if k == 1:
            tot = win[:, 0]
        else:
            tot, cnt = kernels.tree_add(win, act_bits, g, kernels.new_state(m, k - 1))
            record_adders(ledger, model, int(cnt[0]), int(cnt[1]))
        sh = max(0, round(math.log2(k)))
        if ledger is not None and (1 << sh) != k:
            ledger.tally("pool_inexact", m)
        out = tot >> sh
        cycles = act_bits + g
    elif kind == "max":
        out = win[:, 0].copy()
        st = kernels.new_state(m)
        for i in range(1, k):
            # cur - v via the complement path; a negative difference selects v
            d = serial_add_many(out, ~win[:, i], act_bits, model, ledger, cin=1, extend=True, state=st)
            out = np.where(d < 0, win[:, i], out)
            if ledger is not None:
                ledger.tally("pool_compare", m)
        cycles = (k - 1) * (act_bits + 1)
    else:
        raise ValueError(f"unknown pooling {kind!r}")
    _mem(ledger, reads=m * k * act_bits, writes=m * act_bits,
         shifts=2 * m * (k + 1) * act_bits)
    if latency is not None:
        units = cfg.system.mat_groups_per_bank * cfg.system.adders_per_activation_mat
        latency.add("pool", math.ceil(m / units) * cycles)
    return out.reshape(C, H // s, W // s)


def run_layer(layer, x, cfg: SimConfig, ledger: EnergyLedger | None = None,
              latency: LatencyLedger | None = None, engine: str | None = None):
    """Dispatch one model layer (``system.model.Layer``)."""
    eng = engine or layer.engine
    if layer.kind == "flatten":
        return np.asarray(x).reshape(-1)
    if layer.kind == "pool":
        return run_pool(x, layer.size, layer.pool, ledger, latency, cfg, layer.act_bits)
    if layer.kind == "bn":
        p = BatchNormParams(layer.mu, layer.gamma, layer.beta, layer.frac_bits)
        return run_batchnorm(x, p, ledger, latency, cfg, layer.act_bits)
    if eng == "shift" and not layer.log:
        raise ValueError(f"layer {layer.name}: the shift engine needs power-of-two weights")
    common = dict(ledger=ledger, latency=latency, cfg=cfg, engine=eng, act_bits=layer.act_bits,
                  weight_bits=layer.weight_bits, d_max=layer.d_max, relu=layer.relu,
                  shift=layer.shift, mat_groups=layer.mat_groups,
                  log_fields=layer.log_fields if layer.log else None)
    w = None if layer.log else layer.weights
    if layer.kind == "conv":
        return run_conv(x, w, layer.bias, stride=layer.stride, **common)
    return run_fc(x, w, layer.bias, **common)

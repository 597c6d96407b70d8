"""Shift-based multiply-accumulate for power-of-two weights.

Each track holds one activation, LSB nearest the port and a single 0 domain in
front of it.  A per-track down counter, preloaded from the weight's shift distance,
enables shifting for exactly n_b consecutive cycles.  Tracks with more negative
distances start earlier, so their bits reach the adder tree sooner, which is the
same as shifting them right.  After its window a track stays on its MSB, which
sign-extends it.  Cycles 1..D only carry bits below the binary point and are kept
out of the adder tree, so every term is floored.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .alu import record_adders
from .config import AdderEnergyModel, ceil_log2
from .ledger import EnergyLedger, LatencyLedger


class DistanceOutOfRange(ValueError):
    pass


def growth_bits(k: int) -> int:
    """Extra result bits for a k-input tree (one guard bit covers negating -2^(n-1))."""
    return ceil_log2(k) + 1


@dataclass(frozen=True)
class ShiftMacConfig:
    n_b: int
    d_max: int
    counter_width: int | None = None
    max_k: int = 16

    def __post_init__(self):
        if self.n_b < 1 or self.d_max < 1 or self.max_k < 1:
            raise ValueError("n_b, d_max and max_k must be positive")
        need = self.min_counter_width()
        if self.counter_width is None:
            object.__setattr__(self, "counter_width", need)
        elif self.counter_width < need:
            raise ValueError(f"counter width {self.counter_width} < required {need}")

    @property
    def D(self) -> int:
        return self.d_max - 1

    @property
    def padded_n_b(self) -> int:
        return 1 << ceil_log2(self.n_b)

    def min_counter_width(self) -> int:
        # the "10" region must hold the (padded) window, and one pass must not wrap
        w = ceil_log2(self.padded_n_b) + 2
        states = self.n_b + 2 * (self.d_max - 1) + growth_bits(self.max_k)
        return max(w, ceil_log2(states))

    @property
    def window_lo(self) -> int:
        return 1 << (self.counter_width - 1)

    @property
    def window_hi(self) -> int:
        return self.window_lo + self.n_b - 1

    @property
    def single_conjunction(self) -> bool:
        """True when the window is a fixed-bit pattern (n_b a power of two)."""
        return self.padded_n_b == self.n_b

    def latency(self) -> int:
        return self.n_b + 2 * self.D

    def init_value(self, d: int) -> int:
        return (self.window_hi + 1 + self.D + d) % (1 << self.counter_width)


def shift_enabled(counter_value: int, config: ShiftMacConfig) -> bool:
    v = counter_value % (1 << config.counter_width)
    if config.single_conjunction:
        k = ceil_log2(config.n_b)
        # top bits "10" and zeros down to bit k: one AND over fixed bits
        return (v >> k) == (config.window_lo >> k)
    return config.window_lo <= v <= config.window_hi


@dataclass
class TrackCounter:
    value: int
    width: int
    history: list[bool] = field(default_factory=list)

    def step(self, config: ShiftMacConfig) -> bool:
        self.value = (self.value - 1) % (1 << self.width)
        en = shift_enabled(self.value, config)
        self.history.append(en)
        return en


def enable_schedule(distances, config: ShiftMacConfig, k_for_flush: int | None = None) -> np.ndarray:
    """(k, cycles) boolean matrix of shift enables, cycles numbered from 1."""
    d = [int(x) for x in distances]
    _check_distances(d, config)
    k = k_for_flush or len(d)
    cycles = config.latency() + growth_bits(k)
    out = np.zeros((len(d), cycles), dtype=bool)
    for i, di in enumerate(d):
        ctr = TrackCounter(config.init_value(di), config.counter_width)
        for t in range(cycles):
            out[i, t] = ctr.step(config)
    return out


def _check_distances(d, config):
    for x in d:
        if abs(x) > config.D:
            raise DistanceOutOfRange(f"shift distance {x} outside ±{config.D}")


def floor_shift(a, d):
    """a * 2**d, floored for negative d (arithmetic right shift)."""
    a = np.asarray(a, dtype=np.int64)
    d = np.asarray(d, dtype=np.int64)
    return np.where(d >= 0, a << np.maximum(d, 0), a >> np.maximum(-d, 0))


@dataclass
class ShiftUnitState:
    tree: np.ndarray
    comp: np.ndarray

    @classmethod
    def fresh(cls, lanes: int, k: int) -> "ShiftUnitState":
        return cls(kernels.new_state(lanes, k - 1), kernels.new_state(lanes, k))


def shift_mac_many(acts, dists, config: ShiftMacConfig, neg=None, zero=None,
                   model: AdderEnergyModel | None = None, ledger: EnergyLedger | None = None,
                   latency: LatencyLedger | None = None,
                   state: ShiftUnitState | None = None) -> np.ndarray:
    """Vectorized shift-MAC: acts/dists are (m, k); returns m sums.

    ``neg`` marks negative weights (the track goes through a complement stage) and
    ``zero`` marks zero weights (the track is skipped).
    """
    model = model or AdderEnergyModel()
    acts = np.atleast_2d(np.asarray(acts, dtype=np.int64))
    m, k = acts.shape
    if k > config.max_k:
        raise ValueError(f"k={k} exceeds max_k={config.max_k}")
    dists = np.broadcast_to(np.asarray(dists, dtype=np.int64), (m, k))
    if dists.size and np.abs(dists).max() > config.D:
        raise DistanceOutOfRange(f"shift distance outside ±{config.D}")
    lo_a, hi_a = -(1 << (config.n_b - 1)), (1 << (config.n_b - 1)) - 1
    if acts.size and (acts.min() < lo_a or acts.max() > hi_a):
        raise ValueError(f"activations out of range for n_b={config.n_b}")
    neg = np.zeros((m, k), np.int8) if neg is None else neg
    zero = np.zeros((m, k), np.int8) if zero is None else zero
    if state is None:
        state = ShiftUnitState.fresh(m, k)
    g = growth_bits(k)
    out, c = kernels.shift_mac(acts, dists, neg, zero, config.n_b, config.D,
                               config.counter_width, config.window_lo, g,
                               state.tree, state.comp)
    charge_shift_counts(ledger, model, c, m, config.n_b)
    if latency is not None:
        latency.add("shift_mac", config.latency())
        latency.add("flush", max(0, g - config.D))
    return out


def charge_shift_counts(ledger, model, c, lanes, n_b, memory=True):
    if ledger is None:
        return
    record_adders(ledger, model, int(c[0] + c[1]), int(c[2]))
    if memory:
        ledger.add("rt_read", int(c[3]))
        # access shifts plus the uniform position reset of every active track
        ledger.add("rt_shift", int(c[4]) * 2)
    ledger.tally("shift_lane", lanes)
    ledger.tally("shift_access_shift", int(c[4]))
    ledger.tally("shift_reset_shift", int(c[4]))


def shift_mac(activations, distances, config: ShiftMacConfig,
              model: AdderEnergyModel | None = None, ledger: EnergyLedger | None = None,
              latency: LatencyLedger | None = None, signs=None) -> int:
    """Single-lane shift-MAC over k activations: sum of floor_shift(s_i * a_i, d_i)."""
    acts = np.asarray(activations, dtype=np.int64)[None, :]
    d = np.asarray(distances, dtype=np.int64)[None, :]
    neg = None
    if signs is not None:
        neg = (np.asarray(signs)[None, :] < 0).astype(np.int8)
    return int(shift_mac_many(acts, d, config, neg=neg, model=model, ledger=ledger,
                              latency=latency)[0])


def shift_mac_trace(activations, distances, config: ShiftMacConfig):
    """Per-cycle streamed bits of each track (before the adder tree), for inspection."""
    en = enable_schedule(distances, config)
    acts = [int(a) for a in activations]
    k, cycles = en.shape
    bits = np.zeros((k, cycles), dtype=np.int8)
    for i in range(k):
        pos = 0
        for t in range(cycles):
            pos += int(en[i, t])
            bits[i, t] = 0 if pos == 0 else (acts[i] >> (min(pos, config.n_b) - 1)) & 1
    return en, bits

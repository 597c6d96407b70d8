"""Radix-4 Booth multiplier built from bit-serial adders and racetrack tracks.

The multiplier (weight) is held bit-parallel and recoded into n/2 overlapping
blocks.  The multiplicand (activation) streams in LSB first.  Each block drives one
generation lane (an adder doing complement/increment) that writes an (n+1)-bit
partial product into its own track.  Tracks are then offset by 2T positions, plus
one more for blocks that need x2, and streamed through a chain of n/2 bit-serial
adders for 2n cycles.  A track stops shifting at its MSB so the sign repeats.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .alu import InputMtjState, full_add, record_adders
from .config import AdderEnergyModel, SimConfig
from .device import signed_word
from .ledger import EnergyLedger, LatencyLedger


@dataclass(frozen=True)
class BoothBlock:
    b2: int
    b1: int
    b0: int

    @property
    def bits(self) -> str:
        return f"{self.b2}{self.b1}{self.b0}"

    @property
    def factor(self) -> int:
        return -2 * self.b2 + self.b1 + self.b0


@dataclass(frozen=True)
class BoothControl:
    zero: int
    comp: int
    incr: int
    ls: int


@dataclass
class BoothPipelineState:
    multiplier: int
    multiplicand: int
    n: int
    blocks: list[BoothBlock] = field(default_factory=list)
    controls: list[BoothControl] = field(default_factory=list)
    pp_tracks: list[int] = field(default_factory=list)  # (n+1)-bit values
    offsets: list[int] = field(default_factory=list)
    gen_states: list[InputMtjState] = field(default_factory=list)
    acc_states: list[InputMtjState] = field(default_factory=list)


def _parse_word(w, n: int | None) -> tuple[int, int]:
    if isinstance(w, str):
        bits = w.strip().replace("_", "")
        if not bits or set(bits) - {"0", "1"}:
            raise ValueError(f"not a bit string: {w!r}")
        return signed_word(int(bits, 2), len(bits)), len(bits)
    if n is None:
        raise ValueError("integer multiplier needs an explicit width n")
    return signed_word(int(w), n), n


def recode(multiplier, n: int | None = None) -> list[BoothBlock]:
    """LSB-first overlapping 3-bit windows of the multiplier (an implicit 0 below bit 0).

    ``multiplier`` is an int (with ``n``) or an MSB-first bit string.
    """
    w, n = _parse_word(multiplier, n)
    if n % 2:
        raise ValueError("Booth recoding needs an even bit-width")
    u = w & ((1 << n) - 1)
    blocks = []
    for i in range(n // 2):
        b0 = 0 if i == 0 else (u >> (2 * i - 1)) & 1
        blocks.append(BoothBlock((u >> (2 * i + 1)) & 1, (u >> (2 * i)) & 1, b0))
    return blocks


def decode(block: BoothBlock) -> BoothControl:
    b2, b1, b0 = block.b2, block.b1, block.b0
    nb2, nb1, nb0 = 1 - b2, 1 - b1, 1 - b0
    zero = (b2 & b1 & b0) | (nb2 & nb1 & nb0)
    comp = b2
    incr = comp & (1 - zero)
    ls = (b2 & nb1 & nb0) | (nb2 & b1 & b0)
    return BoothControl(zero, comp, incr, ls)


def _charge_pp_track(ledger, n, offset):
    """Track events for one partial product: write phase, alignment, streaming,
    then the position reset back to the write port."""
    if ledger is None:
        return
    ledger.add("rt_write", n + 1)
    ledger.add("rt_read", offset + n + 1)
    ledger.add("rt_shift", 4 * n + 2 * offset)


def gen_partial_products(multiplicand: int, blocks, n: int, state: BoothPipelineState | None = None,
                         model: AdderEnergyModel | None = None,
                         ledger: EnergyLedger | None = None) -> BoothPipelineState:
    """Generate the n/2 partial products bit-serially (one adder per block).

    The multiplicand streams for n cycles and its MSB is held for one more so the
    partial product carries its own sign bit.
    """
    model = model or AdderEnergyModel()
    a = signed_word(multiplicand, n)
    blocks = list(blocks)
    if state is None:
        w = sum(b.factor * 4 ** i for i, b in enumerate(blocks))
        state = BoothPipelineState(multiplier=w, multiplicand=a, n=n)
    state.blocks = blocks
    state.controls = [decode(b) for b in blocks]
    if not state.gen_states:
        state.gen_states = [InputMtjState() for _ in blocks]
    state.pp_tracks, state.offsets = [], []
    for T, ctl in enumerate(state.controls):
        c = ctl.incr
        pp = 0
        for t in range(n + 1):
            src = (a >> min(t, n - 1)) & 1
            x = 0 if ctl.zero else src ^ ctl.comp
            s, c = full_add(x, 0, c, state.gen_states[T], model, ledger)
            pp |= s << t
        state.pp_tracks.append(signed_word(pp, n + 1))
        state.offsets.append(2 * T + ctl.ls)
    return state


def align_accumulate(state: BoothPipelineState, model: AdderEnergyModel | None = None,
                     ledger: EnergyLedger | None = None) -> int:
    """Offset the partial-product tracks and sum them over 2n cycles."""
    model = model or AdderEnergyModel()
    n = state.n
    nb = len(state.pp_tracks)
    if not state.acc_states:
        state.acc_states = [InputMtjState() for _ in range(nb)]
    carries = [0] * nb
    out = 0
    for t in range(2 * n):
        run = 0
        for T in range(nb):
            j = t - state.offsets[T]
            # shifting stops at the MSB, so the sign bit keeps coming out
            bit = 0 if j < 0 else (state.pp_tracks[T] >> min(j, n)) & 1
            run, carries[T] = full_add(run, bit, carries[T], state.acc_states[T], model, ledger)
        out |= run << t
    for T in range(nb):
        _charge_pp_track(ledger, n, state.offsets[T])
    return signed_word(out, 2 * n)


def booth_multiply_scalar(a: int, w: int, n: int, model: AdderEnergyModel | None = None,
                          ledger: EnergyLedger | None = None) -> int:
    """Step-by-step reference path through the decomposed operations."""
    st = gen_partial_products(a, recode(w, n), n, model=model, ledger=ledger)
    return align_accumulate(st, model, ledger)


@dataclass
class BoothUnitState:
    """Input-MTJ states of the per-lane generation and accumulation adders."""
    gen: np.ndarray
    acc: np.ndarray

    @classmethod
    def fresh(cls, lanes: int, n: int) -> "BoothUnitState":
        return cls(kernels.new_state(lanes, n // 2), kernels.new_state(lanes, n // 2))


def booth_multiply(a, w, n: int, model: AdderEnergyModel | None = None,
                   ledger: EnergyLedger | None = None, latency: LatencyLedger | None = None,
                   state: BoothUnitState | None = None, overlap_alignment: bool = False) -> np.ndarray:
    """Vectorized Booth multiply, one lane per (a, w) pair; returns 2n-bit products."""
    model = model or AdderEnergyModel()
    a = np.atleast_1d(np.asarray(a, dtype=np.int64))
    w = np.atleast_1d(np.asarray(w, dtype=np.int64))
    a, w = np.broadcast_arrays(a, w)
    lo, hi = -(1 << (n - 1)), (1 << (n - 1)) - 1
    if a.size and (a.min() < lo or a.max() > hi or w.min() < lo or w.max() > hi):
        raise ValueError(f"operands out of range for {n}-bit Booth")
    if state is None:
        state = BoothUnitState.fresh(a.shape[0], n)
    prod, c = kernels.booth(a, w, n, state.gen, state.acc)
    charge_booth_counts(ledger, model, c, a.shape[0])
    if latency is not None:
        latency.add("booth", booth_latency(n, overlap_alignment)["multiply"])
    return prod


def charge_booth_counts(ledger, model, c, lanes):
    if ledger is None:
        return
    record_adders(ledger, model, int(c[0] + c[1]), int(c[2]))
    ledger.add("rt_write", int(c[3]))
    ledger.add("rt_read", int(c[4]))
    ledger.add("rt_shift", int(c[5]))
    ledger.tally("booth_lane", lanes)


def booth_latency(n: int, overlap_alignment: bool = False) -> dict[str, int]:
    """Cycle counts of one Booth pass.

    generation: n multiplicand bits plus one sign-completion cycle; alignment: the
    largest offset, 2(n/2-1)+1; accumulation: 2n.  A MAC adds the 2n-cycle
    accumulation of the product into the running sum.
    """
    gen = n + 1
    align = 0 if overlap_alignment else n - 1
    acc = 2 * n
    mult = gen + align + acc
    return {"read": n, "generation": gen, "alignment": align, "accumulation": acc,
            "multiply": mult, "mac": mult + 2 * n}


def characterize(n: int, mode: str, samples: int = 4096, seed: int = 0,
                 cfg: SimConfig | None = None) -> dict[str, float]:
    """Average energy of one n-bit Booth multiply over random signed operands."""
    cfg = (cfg or SimConfig()).with_mode(mode)
    rng = np.random.default_rng(seed)
    lo, hi = -(1 << (n - 1)), 1 << (n - 1)
    a = rng.integers(lo, hi, samples)
    w = rng.integers(lo, hi, samples)
    led = EnergyLedger.from_config(cfg)
    # one physical unit doing the samples back to back
    st = BoothUnitState.fresh(1, n)
    prods = np.empty(samples, dtype=np.int64)
    c_tot = np.zeros(7, dtype=np.int64)
    for i in range(samples):
        p, c = kernels.booth(a[i:i + 1], w[i:i + 1], n, st.gen, st.acc)
        prods[i] = p[0]
        c_tot += c
    if not np.array_equal(prods, a * w):
        raise AssertionError("Booth unit mismatch during characterization")
    charge_booth_counts(led, cfg.adder, c_tot, samples)
    e = led.total / samples
    return {"bits": n, "mode": cfg.adder.mode, "energy_pj": e, "energy_per_bit_pj": e / n,
            "latency_cycles": booth_latency(n)["multiply"]}

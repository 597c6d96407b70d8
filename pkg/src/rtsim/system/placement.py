"""Mapping of a layer's activations, weights and partial sums onto the hierarchy.

Activations of one input column are stored as MU words, one word per slot.  A
slot holds, on its 4 tracks, the input rows that 4 consecutive output rows need
for one filter row, so a single MU access feeds 4 outputs at once.  Slots whose
row sets coincide are shared; the rest hold duplicated activations.  Even columns
live in SAR0 and odd columns in SAR1 of an activation mat so that consecutive
accesses alternate subarrays and each MU can reset while the other is read.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..config import SimConfig


class CapacityExceeded(RuntimeError):
    def __init__(self, what: str, need: int, have: int):
        self.shortfall = need - have
        self.need, self.have = need, have
        super().__init__(f"{what}: need {need}, have {have} (short by {need - have})")


@dataclass(frozen=True)
class LayerShape:
    C: int
    H: int
    W: int
    F: int
    P: int
    Q: int
    U: int = 1

    def __post_init__(self):
        for k in ("C", "H", "W", "F", "P", "Q", "U"):
            if getattr(self, k) < 1:
                raise ValueError(f"{k} must be positive")
        if self.P > self.H or self.Q > self.W:
            raise ValueError("filter larger than input")
        if (self.H - self.P) % self.U or (self.W - self.Q) % self.U:
            raise ValueError("stride does not tile the input exactly")

    @property
    def D(self) -> int:
        return (self.H - self.P + self.U) // self.U

    @property
    def E(self) -> int:
        return (self.W - self.Q + self.U) // self.U

    @property
    def macs(self) -> int:
        return self.F * self.D * self.E * self.C * self.P * self.Q

    @property
    def params(self) -> int:
        return self.F * self.C * self.P * self.Q + self.F


@dataclass
class LayerPlacement:
    shape: LayerShape
    n_b: int
    engine: str
    tracks: int
    groups: list[list[int]]  # channels per mat group
    slot_keys: list[tuple[int, ...]]  # rows per track, -1 where unused
    slot_of: np.ndarray  # (blocks, P) -> slot index
    words_per_port: int
    words_per_mu: int
    words_per_sar: int
    # channel -> per column (mat, sar, first word)
    columns: dict[int, list[tuple[int, int, int]]] = field(default_factory=dict)
    channel_group: dict[int, int] = field(default_factory=dict)
    duplicates: int = 0
    used_words: dict[tuple[int, int, int], int] = field(default_factory=dict)
    weight_bytes: dict[int, int] = field(default_factory=dict)
    filters_per_tile: int = 1
    experimental: bool = False
    fc: bool = False

    @property
    def n_slots(self) -> int:
        return len(self.slot_keys)

    @property
    def blocks(self) -> int:
        return -(-self.shape.D // self.tracks)

    @property
    def bits_per_word(self) -> int:
        # the shift engine keeps a single 0 domain in front of every word
        return self.n_b + 1 if self.engine == "shift" else self.n_b

    def word_address(self, c: int, col: int, slot: int) -> tuple[int, int, int, int, int, int]:
        """(group, mat, sar, mu, port, word) of one stored MU word."""
        mat, sar, base = self.columns[c][col]
        idx = base + slot
        mu, rest = divmod(idx, self.words_per_mu)
        port, word = divmod(rest, self.words_per_port)
        return self.channel_group[c], mat, sar, mu, port, word

    def mu_id(self, c: int, col: int, slot: int) -> tuple[int, int, int, int]:
        g, mat, sar, mu, _, _ = self.word_address(c, col, slot)
        return g, mat, sar, mu

    def subarray_bytes(self) -> dict[tuple[int, int, int], float]:
        per_word = self.tracks_per_mu_bytes()
        return {k: v * per_word for k, v in self.used_words.items()}

    def tracks_per_mu_bytes(self) -> float:
        # a word occupies the same domains on all 4 tracks of its MU
        return 4 * self.bits_per_word / 8

    def mat_bytes(self) -> dict[tuple[int, int], float]:
        out: dict[tuple[int, int], float] = {}
        for (g, mat, sar), b in self.subarray_bytes().items():
            out[(g, mat)] = out.get((g, mat), 0) + b
        return out

    @property
    def groups_used(self) -> int:
        return sum(1 for g in self.groups if g)


def _slot_table(shape: LayerShape, tracks: int):
    """Distinct track->row assignments and the slot used by (output block, filter row)."""
    D, P, U = shape.D, shape.P, shape.U
    blocks = -(-D // tracks)
    keys: list[tuple[int, ...]] = []
    index: dict[tuple[int, ...], int] = {}
    slot_of = np.zeros((blocks, P), dtype=np.int64)
    wanted = []
    for s in range(blocks):
        for p in range(P):
            key = tuple((tracks * s + t) * U + p if tracks * s + t < D else -1
                        for t in range(tracks))
            wanted.append((s, p, key))
    # full keys first so partial blocks can reuse them
    wanted.sort(key=lambda x: (-1 in x[2], x[0], x[1]))
    for s, p, key in wanted:
        hit = index.get(key)
        if hit is None and -1 in key:
            for i, k in enumerate(keys):
                if all(a == -1 or a == b for a, b in zip(key, k)):
                    hit = i
                    break
        if hit is None:
            hit = len(keys)
            keys.append(key)
            index[key] = hit
        slot_of[s, p] = hit
    return keys, slot_of


def count_duplicates(keys, H: int) -> int:
    stored = sum(1 for k in keys for r in k if r >= 0)
    rows = {r for k in keys for r in k if r >= 0}
    return stored - len(rows)


def words_per_port(n_b: int, engine: str, cfg: SimConfig) -> int:
    bits = n_b + 1 if engine == "shift" else n_b
    return cfg.device.domains_per_port // bits


def assign_groups(C: int, n_groups: int) -> list[list[int]]:
    return [[c for c in range(C) if c % n_groups == g] for g in range(n_groups)]


def place_conv_layer(shape: LayerShape, cfg: SimConfig | None = None, n_b: int = 8,
                     engine: str = "booth", mat_groups: int | None = None,
                     weight_bits: int = 8, fc: bool = False,
                     groups: list[list[int]] | None = None) -> LayerPlacement:
    cfg = cfg or SimConfig()
    sysc = cfg.system
    if engine not in ("booth", "shift"):
        raise ValueError(f"unknown engine {engine!r}")
    n_groups = min(mat_groups or sysc.mat_groups_per_bank * sysc.banks, shape.C)
    tracks = 1 if fc else cfg.device.tracks_per_mu
    wpp = words_per_port(n_b, engine, cfg)
    if wpp == 0:
        raise CapacityExceeded(f"{n_b}-bit word for the {engine} engine in one port segment",
                               n_b + (engine == "shift"), cfg.device.domains_per_port)
    wpm = wpp * cfg.device.ports_per_track
    wps = wpm * sysc.mus_per_subarray
    if fc:
        keys, slot_of = [(0,)], np.zeros((1, 1), dtype=np.int64)
    else:
        keys, slot_of = _slot_table(shape, tracks)
    groups = groups or assign_groups(shape.C, n_groups)
    pl = LayerPlacement(shape, n_b, engine, tracks, groups, keys, slot_of, wpp, wpm, wps,
                        fc=fc, experimental=shape.U > 1)
    S = len(keys)
    if S > wps:
        raise CapacityExceeded("MU words for one input column", S, wps)
    n_act_mats = sysc.activation_mats_per_group
    for g, chans in enumerate(groups):
        # one cursor per subarray parity walking over the activation mats
        cursor = [[0, 0], [0, 0]]  # [mat, used words] for SAR0 / SAR1
        cols_of = (lambda c: [0]) if fc else (lambda c: range(shape.W))
        for j, c in enumerate(chans):
            pl.channel_group[c] = g
            entries = []
            for col in cols_of(c):
                sar = (j if fc else col) % 2
                mat, used = cursor[sar]
                if used + S > wps:
                    mat, used = mat + 1, 0
                if mat >= n_act_mats:
                    need = (len(chans) * (1 if fc else shape.W)) * S
                    raise CapacityExceeded(f"activation words in mat group {g}", need,
                                           n_act_mats * 2 * wps)
                entries.append((mat, sar, used))
                cursor[sar] = [mat, used + S]
                key = (g, mat, sar)
                pl.used_words[key] = pl.used_words.get(key, 0) + S
            pl.columns[c] = entries
        wbits = shape.F * len(chans) * shape.P * shape.Q * weight_bits
        pl.weight_bytes[g] = -(-wbits // 8)
        cap = n_act_mats * sysc.mat_capacity
        if pl.weight_bytes[g] > cap:
            raise CapacityExceeded(f"weight bytes in mat group {g}", pl.weight_bytes[g], cap)
    if not fc:
        pl.duplicates = count_duplicates(keys, shape.H) * shape.W * shape.C
    psum_bytes = shape.D * shape.E * sysc.acc_bits // 8
    psum_cap = n_act_mats * sysc.subarray_capacity
    if psum_bytes > psum_cap:
        raise CapacityExceeded("partial sums of one filter", psum_bytes, psum_cap)
    pl.filters_per_tile = max(1, min(shape.F, psum_cap // psum_bytes))
    return pl


def place_fc_layer(M: int, N: int, cfg: SimConfig | None = None, n_b: int = 8,
                   engine: str = "booth", mat_groups: int | None = None,
                   weight_bits: int = 8) -> LayerPlacement:
    """Fully connected layer: every input activation is a 1x1 'channel' on one track."""
    shape = LayerShape(M, 1, 1, N, 1, 1, 1)
    return place_conv_layer(shape, cfg, n_b, engine, mat_groups, weight_bits, fc=True)

"""Racetrack strips and macro units.

Conventions: domain 0 holds the LSB of the first word under port 0.  A shift with
``direction=+1`` moves the data so that the domain one index higher comes under
each port, i.e. after ``k`` such shifts a port at home position ``p`` sees domain
``p + k``.  Every primitive records its events into the ledgers it is given.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import DeviceParams
from .ledger import EnergyLedger, LatencyLedger


class OverheadExceeded(RuntimeError):
    """A shift would push data-bearing domains past the overhead region."""


class RacetrackStrip:
    def __init__(self, params: DeviceParams, overhead: int | None = None):
        self.n_domains = params.domains_per_track
        self.overhead_capacity = params.overhead_capacity if overhead is None else overhead
        step = params.domains_per_port
        self.port_positions = tuple(range(0, self.n_domains, step))
        # data region plus an overhead region at each end
        self._bits = np.zeros(self.n_domains + 2 * self.overhead_capacity, dtype=np.uint8)
        self.offset = 0

    @property
    def data(self) -> np.ndarray:
        o = self.overhead_capacity
        return self._bits[o:o + self.n_domains]

    def _index(self, port_index: int) -> int:
        if not 0 <= port_index < len(self.port_positions):
            raise IndexError(f"port {port_index} out of range")
        return self.overhead_capacity + self.port_positions[port_index] + self.offset

    def read(self, port_index: int) -> int:
        return int(self._bits[self._index(port_index)])

    def write(self, port_index: int, bit: int) -> None:
        self._bits[self._index(port_index)] = 1 if bit else 0

    def _shift(self, direction: int) -> None:
        new = self.offset + direction
        if abs(new) > self.overhead_capacity:
            raise OverheadExceeded(
                f"offset {new} exceeds overhead capacity {self.overhead_capacity}")
        self.offset = new


@dataclass
class MacroUnit:
    params: DeviceParams
    tracks: list[RacetrackStrip] = field(default_factory=list)

    def __post_init__(self):
        if not self.tracks:
            self.tracks = [RacetrackStrip(self.params) for _ in range(self.params.tracks_per_mu)]
        if len(self.tracks) != self.params.tracks_per_mu:
            raise ValueError("a macro unit holds exactly tracks_per_mu strips")

    @property
    def shared_offset(self) -> int:
        return self.tracks[0].offset

    @property
    def overhead_capacity(self) -> int:
        return self.tracks[0].overhead_capacity

    @property
    def ports_per_track(self) -> int:
        return len(self.tracks[0].port_positions)

    def offsets(self) -> list[int]:
        return [t.offset for t in self.tracks]


def shift_mu(mu: MacroUnit, direction: int, ledger: EnergyLedger | None = None,
             latency: LatencyLedger | None = None) -> None:
    if direction == 0:
        return
    if direction not in (1, -1):
        raise ValueError("direction must be +1, -1 or 0")
    if abs(mu.shared_offset + direction) > mu.overhead_capacity:
        raise OverheadExceeded(
            f"offset {mu.shared_offset + direction} exceeds overhead capacity "
            f"{mu.overhead_capacity}")
    for t in mu.tracks:
        t._shift(direction)
    if ledger is not None:
        ledger.add("rt_shift", len(mu.tracks))
    if latency is not None:
        latency.add("device", 1)


def access_bit(mu: MacroUnit, port_index: int, mode: str, bit: int | None = None,
               ledger: EnergyLedger | None = None, latency: LatencyLedger | None = None,
               track: int = 0) -> int:
    t = mu.tracks[track]
    if mode == "read":
        out = t.read(port_index)
        if ledger is not None:
            ledger.add("rt_read")
    elif mode == "write":
        if bit is None:
            raise ValueError("write needs a bit")
        t.write(port_index, bit)
        out = 1 if bit else 0
        if ledger is not None:
            ledger.add("rt_write")
    else:
        raise ValueError(f"mode must be read or write, got {mode!r}")
    if latency is not None:
        latency.add("device", 1)
    return out


def serial_access_word(mu: MacroUnit, port_index: int, n_bits: int, mode: str,
                       words=None, ledger: EnergyLedger | None = None,
                       latency: LatencyLedger | None = None) -> list[int]:
    """Stream one ``n_bits`` word per track through a port, LSB first.

    Each cycle accesses the domain under the port on every track and then shifts
    the MU by one.  The MU is left ``n_bits`` away from where it started; putting it
    back is the caller's job (``reset_position``).
    """
    n_tracks = len(mu.tracks)
    if n_bits < 0:
        raise ValueError("n_bits must be non-negative")
    spacing = mu.params.domains_per_port
    if n_bits > spacing:
        raise ValueError(f"n_bits={n_bits} exceeds the {spacing} domains behind a port")
    if mode == "write":
        if words is None or len(words) != n_tracks:
            raise ValueError(f"write needs {n_tracks} words")
        words = [int(w) for w in words]
    elif mode != "read":
        raise ValueError(f"mode must be read or write, got {mode!r}")
    # check the whole access up front so a failure leaves the MU untouched
    if abs(mu.shared_offset + n_bits) > mu.overhead_capacity:
        raise OverheadExceeded(
            f"access of {n_bits} bits from offset {mu.shared_offset} exceeds "
            f"overhead capacity {mu.overhead_capacity}")
    out = [0] * n_tracks
    for j in range(n_bits):
        for k, t in enumerate(mu.tracks):
            if mode == "read":
                out[k] |= t.read(port_index) << j
            else:
                t.write(port_index, (words[k] >> j) & 1)
        shift_mu(mu, 1, ledger)
    if ledger is not None and n_bits:
        ledger.add("rt_read" if mode == "read" else "rt_write", n_bits * n_tracks)
    if latency is not None and n_bits:
        latency.add("access", n_bits)
    if mode == "write":
        return [w & ((1 << n_bits) - 1) for w in words] if n_bits else [0] * n_tracks
    return out


def reset_position(mu: MacroUnit, ledger: EnergyLedger | None = None,
                   latency: LatencyLedger | None = None) -> int:
    steps = abs(mu.shared_offset)
    direction = -1 if mu.shared_offset > 0 else 1
    for _ in range(steps):
        shift_mu(mu, direction, ledger)
    if latency is not None and steps:
        latency.add("reset", steps)
    return steps


def signed_word(value: int, n_bits: int) -> int:
    """Interpret the low ``n_bits`` of ``value`` as two's complement."""
    value &= (1 << n_bits) - 1
    return value - (1 << n_bits) if n_bits and value >> (n_bits - 1) else value

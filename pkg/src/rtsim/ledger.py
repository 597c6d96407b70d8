"""Event-counting energy and latency accumulators.

Both ledgers are plain counters plus unit costs, so merging is just adding counts.
Energies are in pJ, latencies in clock cycles.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .config import SimConfig

ENERGY_KEYS = (
    "rt_write",       # data write into a racetrack domain
    "rt_read",        # port read
    "rt_shift",       # one strip moved by one domain
    "mtj_write",      # adder input MTJ written (baseline adders)
    "mtj_shift",      # adder input MTJ shifted (write-shift adders)
    "shift_control",  # control overhead per input MTJ shift
    "fa_logic",
    "ha_logic",
    "dram_bit",
)


def unit_costs_from_config(cfg: SimConfig) -> dict[str, float]:
    d, a, s = cfg.device, cfg.adder, cfg.system
    return {
        "rt_write": d.write_energy,
        "rt_read": d.read_energy,
        "rt_shift": d.shift_energy,
        "mtj_write": d.write_energy,
        "mtj_shift": d.shift_energy,
        "shift_control": a.shift_control_energy * 1e-3,
        "fa_logic": a.logic_energy_fa * 1e-3,
        "ha_logic": a.logic_energy_ha * 1e-3,
        "dram_bit": s.dram_energy_per_bit,
    }


@dataclass
class EnergyLedger:
    unit_costs: dict[str, float] = field(
        default_factory=lambda: unit_costs_from_config(SimConfig()))
    counts: Counter = field(default_factory=Counter)
    # audit counters with no energy attached (passes, lanes, stalls ...)
    tallies: Counter = field(default_factory=Counter)

    @classmethod
    def from_config(cls, cfg: SimConfig) -> "EnergyLedger":
        return cls(unit_costs=unit_costs_from_config(cfg))

    def add(self, key: str, n: int = 1) -> None:
        if key not in self.unit_costs:
            raise KeyError(f"unknown energy event {key!r}")
        n = int(n)
        if n < 0:
            raise ValueError("event counts are non-negative")
        if n:
            self.counts[key] += n

    def tally(self, key: str, n: int = 1) -> None:
        n = int(n)
        if n:
            self.tallies[key] += n

    def energy(self, key: str) -> float:
        return self.counts.get(key, 0) * self.unit_costs[key]

    @property
    def total(self) -> float:
        return sum(self.energy(k) for k in self.unit_costs)

    def breakdown(self) -> dict[str, float]:
        return {k: self.energy(k) for k in ENERGY_KEYS if k in self.unit_costs}

    def copy(self) -> "EnergyLedger":
        return EnergyLedger(dict(self.unit_costs), Counter(self.counts), Counter(self.tallies))

    def merge(self, other: "EnergyLedger") -> "EnergyLedger":
        if other.unit_costs != self.unit_costs:
            raise ValueError("cannot merge ledgers with different unit costs")
        return EnergyLedger(dict(self.unit_costs), self.counts + other.counts,
                            self.tallies + other.tallies)

    __add__ = merge

    def update(self, other: "EnergyLedger") -> None:
        """In-place merge."""
        if other.unit_costs != self.unit_costs:
            raise ValueError("cannot merge ledgers with different unit costs")
        self.counts.update(other.counts)
        self.tallies.update(other.tallies)

    def delta(self, before: "EnergyLedger") -> "EnergyLedger":
        c = Counter(self.counts)
        c.subtract(before.counts)
        t = Counter(self.tallies)
        t.subtract(before.tallies)
        return EnergyLedger(dict(self.unit_costs), +c, +t)

    def __eq__(self, other):
        if not isinstance(other, EnergyLedger):
            return NotImplemented
        return (self.unit_costs == other.unit_costs and +self.counts == +other.counts
                and +self.tallies == +other.tallies)

    def to_dict(self) -> dict:
        return {
            "counts": {k: int(self.counts.get(k, 0)) for k in ENERGY_KEYS},
            "energy_pj": self.breakdown(),
            "total_pj": self.total,
            "tallies": {k: int(v) for k, v in sorted(self.tallies.items())},
        }


@dataclass
class LatencyLedger:
    period_ns: float = 5.0
    cycles: Counter = field(default_factory=Counter)

    @classmethod
    def from_config(cls, cfg: SimConfig) -> "LatencyLedger":
        return cls(period_ns=cfg.clock_ns)

    def add(self, pipeline: str, n: int) -> None:
        n = int(n)
        if n < 0:
            raise ValueError("cycle counts are non-negative")
        if n:
            self.cycles[pipeline] += n

    @property
    def total_cycles(self) -> int:
        return int(sum(self.cycles.values()))

    @property
    def total_ns(self) -> float:
        return self.total_cycles * self.period_ns

    def merge(self, other: "LatencyLedger") -> "LatencyLedger":
        if other.period_ns != self.period_ns:
            raise ValueError("cannot merge latency ledgers with different clocks")
        return LatencyLedger(self.period_ns, self.cycles + other.cycles)

    __add__ = merge

    def update(self, other: "LatencyLedger") -> None:
        if other.period_ns != self.period_ns:
            raise ValueError("cannot merge latency ledgers with different clocks")
        self.cycles.update(other.cycles)

    def to_dict(self) -> dict:
        return {
            "period_ns": self.period_ns,
            "cycles": {k: int(v) for k, v in sorted(self.cycles.items())},
            "total_cycles": self.total_cycles,
            "total_ns": self.total_ns,
        }


def merge_all(ledgers: Iterable[EnergyLedger]) -> EnergyLedger:
    ledgers = list(ledgers)
    out = ledgers[0].copy()
    for led in ledgers[1:]:
        out.update(led)
    return out


def counts_equal(a: Mapping[str, int], b: Mapping[str, int]) -> bool:
    return +Counter(a) == +Counter(b)

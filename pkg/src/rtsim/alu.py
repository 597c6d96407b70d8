"""Half adder, full adder and bit-serial adder with MTJ-input energy accounting.

Adder inputs sit in MTJs.  In ``baseline`` mode every operation rewrites all of them
(7 for a full adder, 4 for a half adder).  In ``write_shift`` mode each input MTJ is
backed by a strip holding both values and is shifted only when the required bit
differs from what it currently shows.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .config import AdderEnergyModel
from .ledger import EnergyLedger, LatencyLedger

# full-adder input MTJs: a, ~a, b, ~b, cin, ~cin (carry tree) and cin (sum stage)
FA_MTJ_MAP = (("a", 0), ("a", 1), ("b", 0), ("b", 1), ("c", 0), ("c", 1), ("c", 0))
HA_MTJ_MAP = (("a", 0), ("a", 1), ("b", 0), ("b", 1))


@dataclass
class InputMtjState:
    """Last logical input seen by each adder input; the per-MTJ cells follow."""
    a: int = 0
    b: int = 0
    c: int = 0
    half: bool = False

    @property
    def cells(self) -> tuple[int, ...]:
        vals = {"a": self.a, "b": self.b, "c": self.c}
        mapping = HA_MTJ_MAP if self.half else FA_MTJ_MAP
        return tuple(vals[k] ^ inv for k, inv in mapping)

    def as_array(self) -> np.ndarray:
        return np.array([[self.a, self.b, self.c]], dtype=np.int8)

    def load(self, arr: np.ndarray) -> None:
        self.a, self.b, self.c = (int(v) for v in arr.reshape(-1)[:3])


def record_adders(ledger: EnergyLedger | None, model: AdderEnergyModel, fa_ops: int,
                  mtj_events: int, ha_ops: int = 0) -> None:
    """Charge ``fa_ops`` full-adder (and ``ha_ops`` half-adder) operations.

    ``mtj_events`` is the number of input-MTJ value changes over those operations;
    it only matters in write-shift mode.
    """
    if ledger is None:
        return
    ledger.add("fa_logic", fa_ops)
    ledger.add("ha_logic", ha_ops)
    if model.write_shift:
        ledger.add("mtj_shift", mtj_events)
        ledger.add("shift_control", mtj_events)
    else:
        ledger.add("mtj_write", model.mtj_writes_fa * fa_ops + model.mtj_writes_ha * ha_ops)


def _changed(state: InputMtjState, a: int, b: int, c: int) -> int:
    before = state.cells
    state.a, state.b, state.c = a, b, c
    return sum(x != y for x, y in zip(before, state.cells))


def full_add(a: int, b: int, cin: int, state: InputMtjState | None = None,
             model: AdderEnergyModel | None = None,
             ledger: EnergyLedger | None = None) -> tuple[int, int]:
    a, b, cin = int(bool(a)), int(bool(b)), int(bool(cin))
    model = model or AdderEnergyModel()
    state = state if state is not None else InputMtjState()
    events = _changed(state, a, b, cin)
    record_adders(ledger, model, 1, events)
    return a ^ b ^ cin, (a & b) | (cin & (a ^ b))


def half_add(a: int, b: int, state: InputMtjState | None = None,
             model: AdderEnergyModel | None = None,
             ledger: EnergyLedger | None = None) -> tuple[int, int]:
    a, b = int(bool(a)), int(bool(b))
    model = model or AdderEnergyModel()
    state = state if state is not None else InputMtjState(half=True)
    events = _changed(state, a, b, 0)
    record_adders(ledger, model, 0, events, ha_ops=1)
    return a ^ b, a & b


def serial_add(x: int, y: int, n: int, state: InputMtjState | None = None,
               model: AdderEnergyModel | None = None, ledger: EnergyLedger | None = None,
               latency: LatencyLedger | None = None, cin: int = 0) -> int:
    """Add two sign-extended n-bit words bit-serially; returns the exact (n+1)-bit sum."""
    if n < 1:
        raise ValueError("n must be >= 1")
    model = model or AdderEnergyModel()
    state = state if state is not None else InputMtjState()
    st = state.as_array()
    out, counts = kernels.serial_add([x], [y], n, cin=cin, extend=True, state=st)
    state.load(st)
    record_adders(ledger, model, int(counts[0]), int(counts[1]))
    if latency is not None:
        latency.add("adder", n)
    return int(out[0])


def serial_add_many(x, y, n: int, model: AdderEnergyModel, ledger: EnergyLedger | None,
                    cin=0, extend: bool = False, state: np.ndarray | None = None) -> np.ndarray:
    """Vectorized bit-serial add, one adder per lane; wraps to n bits unless ``extend``."""
    x = np.asarray(x, dtype=np.int64)
    if state is None:
        state = kernels.new_state(x.shape[0])
    out, counts = kernels.serial_add(x, y, n, cin=cin, extend=extend, state=state)
    record_adders(ledger, model, int(counts[0]), int(counts[1]))
    return out


@dataclass
class AdderCost:
    """Energy of one full-adder operation under a model, for reporting."""
    baseline_pj: float
    write_shift_all_toggle_pj: float
    saving: float = field(init=False)

    def __post_init__(self):
        self.saving = 1.0 - self.write_shift_all_toggle_pj / self.baseline_pj


def full_adder_cost(write_energy_pj: float, shift_energy_pj: float,
                    model: AdderEnergyModel) -> AdderCost:
    logic = model.logic_energy_fa * 1e-3
    base = model.mtj_writes_fa * write_energy_pj + logic
    ws = model.mtj_writes_fa * (shift_energy_pj + model.shift_control_energy * 1e-3) + logic
    return AdderCost(base, ws)


def wrap(v, n: int):
    """Two's complement wrap to n bits (scalar or array)."""
    mask = (1 << n) - 1
    if isinstance(v, np.ndarray):
        v = v.astype(np.int64) & mask
        return np.where(v >> (n - 1) == 1, v - (1 << n), v)
    v = int(v) & mask
    return v - (1 << n) if v >> (n - 1) else v

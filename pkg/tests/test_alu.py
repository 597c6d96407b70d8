import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rtsim import kernels
from rtsim.alu import InputMtjState, full_add, half_add, serial_add, serial_add_many
from rtsim.config import AdderEnergyModel, SimConfig
from rtsim.ledger import EnergyLedger, LatencyLedger

BASE = SimConfig()
WS = SimConfig().with_mode("write_shift")


def test_full_add_truth_table():
    for a, b, c in itertools.product((0, 1), repeat=3):
        s, co = full_add(a, b, c)
        assert s + 2 * co == a + b + c
    assert full_add(1, 1, 0) == (0, 1)


def test_half_add_truth_table():
    for a, b in itertools.product((0, 1), repeat=2):
        s, co = half_add(a, b)
        assert s + 2 * co == a + b


def test_baseline_fa_energy():
    led = EnergyLedger.from_config(BASE)
    full_add(1, 0, 1, InputMtjState(), BASE.adder, led)
    assert led.total == pytest.approx(7.019, abs=1e-12)


def test_write_shift_all_toggle_energy():
    led = EnergyLedger.from_config(WS)
    full_add(1, 1, 1, InputMtjState(), WS.adder, led)
    assert led.counts["mtj_shift"] == 7
    assert led.total == pytest.approx(0.392, rel=0.01)


def test_shift_skip_on_repeat():
    st_ = InputMtjState()
    led = EnergyLedger.from_config(WS)
    full_add(1, 0, 1, st_, WS.adder, led)
    before = led.counts["mtj_shift"]
    full_add(1, 0, 1, st_, WS.adder, led)
    assert led.counts["mtj_shift"] == before


def test_half_adder_mtj_count():
    led = EnergyLedger.from_config(BASE)
    half_add(1, 1, None, BASE.adder, led)
    assert led.counts["mtj_write"] == 4 and led.counts["ha_logic"] == 1


def test_serial_add_zero_and_latency():
    lat = LatencyLedger()
    assert serial_add(0, 0, 8, latency=lat) == 0
    assert lat.cycles["adder"] == 8


def test_serial_add_exhaustive_8bit(backend):
    v = np.arange(-128, 128)
    x, y = np.meshgrid(v, v, indexing="ij")
    out, cnt = kernels.serial_add(x.ravel(), y.ravel(), 8)
    assert np.array_equal(out, (x + y).ravel())
    assert cnt[0] == x.size * 8


@settings(max_examples=100, deadline=None)
@given(st.integers(-2 ** 31, 2 ** 31 - 1), st.integers(-2 ** 31, 2 ** 31 - 1))
def test_serial_add_32bit(x, y):
    assert serial_add(x, y, 32) == x + y


@settings(max_examples=100, deadline=None)
@given(st.integers(-2 ** 15, 2 ** 15 - 1), st.integers(-2 ** 15, 2 ** 15 - 1), st.integers(0, 1))
def test_serial_add_16bit_wrap_and_cin(x, y, c):
    got = serial_add_many(np.array([x]), np.array([y]), 16, AdderEnergyModel(), None, cin=c)[0]
    want = (x + y + c + 2 ** 15) % 2 ** 16 - 2 ** 15
    assert got == want


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=30))
def test_write_shift_always_cheaper(seq):
    lb, lw = EnergyLedger.from_config(BASE), EnergyLedger.from_config(WS)
    sb, sw = InputMtjState(), InputMtjState()
    for a, b, c in seq:
        full_add(a, b, c, sb, BASE.adder, lb)
        full_add(a, b, c, sw, WS.adder, lw)
    assert lw.total < lb.total

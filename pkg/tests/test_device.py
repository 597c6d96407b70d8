import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rtsim.config import DeviceParams
from rtsim.device import (MacroUnit, OverheadExceeded, RacetrackStrip, access_bit, reset_position,
                          serial_access_word, shift_mu, signed_word)
from rtsim.ledger import EnergyLedger, LatencyLedger


@pytest.fixture
def mu():
    return MacroUnit(DeviceParams())


def test_geometry_defaults():
    p = DeviceParams()
    assert p.ports_per_track == 4
    assert p.domains_per_port == 16
    assert p.mu_bytes == 32
    assert RacetrackStrip(p).port_positions == (0, 16, 32, 48)


def test_shift_by_zero_is_identity(mu):
    led = EnergyLedger()
    mu.tracks[0].data[:] = 1
    shift_mu(mu, 0, led)
    assert mu.shared_offset == 0 and led.total == 0
    assert mu.tracks[0].data.all()


def test_eight_down_eight_up_restores(mu, rng):
    bits = rng.integers(0, 2, 64)
    mu.tracks[2].data[:] = bits
    for _ in range(8):
        shift_mu(mu, 1)
    for _ in range(8):
        shift_mu(mu, -1)
    assert mu.shared_offset == 0
    assert np.array_equal(mu.tracks[2].data, bits)


def test_one_mu_shift_energy(mu):
    led = EnergyLedger()
    shift_mu(mu, 1, led)
    assert led.total == pytest.approx(4 * 0.051)
    assert led.total == pytest.approx(0.204)


def test_read_strip_pattern(mu):
    for i, ch in enumerate("01011101"):
        mu.tracks[0].data[i] = int(ch)
    assert access_bit(mu, 0, "read") == 0
    shift_mu(mu, 1)
    assert access_bit(mu, 0, "read") == 1


def test_write_then_read(mu):
    access_bit(mu, 2, "write", 1, track=1)
    assert access_bit(mu, 2, "read", track=1) == 1


def test_read_after_shifts_matches_indexing(mu, rng):
    bits = rng.integers(0, 2, 64)
    mu.tracks[0].data[:] = bits
    for _ in range(3):
        shift_mu(mu, 1)
    for port, pos in enumerate((0, 16, 32, 48)):
        assert access_bit(mu, port, "read") == bits[pos + 3]


def test_serial_read_events(mu):
    led = EnergyLedger()
    serial_access_word(mu, 0, 8, "read", ledger=led)
    assert led.counts["rt_read"] == 32
    assert led.counts["rt_shift"] == 32


def test_zero_bit_access(mu):
    led = EnergyLedger()
    assert serial_access_word(mu, 1, 0, "read", ledger=led) == [0, 0, 0, 0]
    assert led.total == 0 and not led.counts


def test_write_reset_read_roundtrip(mu):
    serial_access_word(mu, 0, 8, "write", [0x5A] * 4)
    reset_position(mu)
    assert serial_access_word(mu, 0, 8, "read") == [0x5A] * 4


def test_reset_from_eight(mu):
    for _ in range(8):
        shift_mu(mu, 1)
    led, lat = EnergyLedger(), LatencyLedger()
    assert reset_position(mu, led, lat) == 8
    assert mu.shared_offset == 0
    assert lat.cycles["reset"] == 8
    assert reset_position(mu, led) == 0


def test_overhead_is_hard_error(mu):
    for _ in range(mu.overhead_capacity):
        shift_mu(mu, 1)
    with pytest.raises(OverheadExceeded):
        shift_mu(mu, 1)
    assert mu.shared_offset == mu.overhead_capacity


def test_access_longer_than_port_segment(mu):
    with pytest.raises(ValueError):
        serial_access_word(mu, 0, 17, "read")


def test_signed_word():
    assert signed_word(0xFF, 8) == -1
    assert signed_word(0x7F, 8) == 127
    assert signed_word(0, 0) == 0


@settings(max_examples=60, deadline=None)
@given(k=st.integers(-16, 16))
def test_reset_takes_abs_k_steps(k):
    mu = MacroUnit(DeviceParams())
    for _ in range(abs(k)):
        shift_mu(mu, 1 if k > 0 else -1)
    assert reset_position(mu) == abs(k)
    assert mu.offsets() == [0, 0, 0, 0]


@settings(max_examples=60, deadline=None)
@given(words=st.lists(st.integers(0, 2 ** 16 - 1), min_size=4, max_size=4),
       port=st.integers(0, 3), n=st.integers(1, 16))
def test_roundtrip_any_word_any_port(words, port, n):
    mu = MacroUnit(DeviceParams())
    serial_access_word(mu, port, n, "write", words)
    reset_position(mu)
    assert serial_access_word(mu, port, n, "read") == [w & ((1 << n) - 1) for w in words]


@settings(max_examples=60, deadline=None)
@given(moves=st.lists(st.sampled_from([-1, 0, 1]), max_size=40))
def test_offset_conservation_and_coupling(moves):
    mu = MacroUnit(DeviceParams())
    total = 0
    for m in moves:
        try:
            shift_mu(mu, m)
            total += m
        except OverheadExceeded:
            pass
        assert abs(mu.shared_offset) <= mu.overhead_capacity
        assert len(set(mu.offsets())) == 1
    assert mu.shared_offset == total


@settings(max_examples=40, deadline=None)
@given(a=st.lists(st.sampled_from([-1, 1]), max_size=10), b=st.lists(st.sampled_from([-1, 1]), max_size=10))
def test_ledger_linearity(a, b):
    def run(seq, led):
        mu = MacroUnit(DeviceParams(overhead_multiplier=2))
        for m in seq:
            shift_mu(mu, m, led)
        serial_access_word(mu, 0, 4, "read", ledger=led)
    la, lb, lab = EnergyLedger(), EnergyLedger(), EnergyLedger()
    run(a, la)
    run(b, lb)
    run(a, lab)
    run(b, lab)
    assert lab.total == pytest.approx(la.total + lb.total)

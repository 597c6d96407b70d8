import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rtsim.ledger import EnergyLedger
from rtsim.shift_mac import (DistanceOutOfRange, ShiftMacConfig, enable_schedule, floor_shift,
                             growth_bits, shift_enabled, shift_mac, shift_mac_many, shift_mac_trace)


def test_counter_window_4bit():
    cfg = ShiftMacConfig(4, 2, counter_width=4)
    on = [v for v in range(16) if shift_enabled(v, cfg)]
    assert on == [0b1000, 0b1001, 0b1010, 0b1011]
    assert cfg.single_conjunction


def test_counter_window_non_power_of_two():
    cfg = ShiftMacConfig(6, 4)
    on = [v for v in range(1 << cfg.counter_width) if shift_enabled(v, cfg)]
    assert len(on) == 6 and on[0] == cfg.window_lo
    assert not cfg.single_conjunction


def test_counter_width_too_small():
    with pytest.raises(ValueError):
        ShiftMacConfig(8, 8, counter_width=3)


@pytest.mark.parametrize("n_b,d_max", [(4, 2), (4, 4), (8, 8), (6, 4)])
def test_enabled_for_exactly_n_b_cycles(n_b, d_max):
    cfg = ShiftMacConfig(n_b, d_max)
    # a full counter wrap enables the shift exactly n_b times
    en = sum(shift_enabled(v, cfg) for v in range(1 << cfg.counter_width))
    assert en == n_b
    d = list(range(-cfg.D, cfg.D + 1))
    sched = enable_schedule(d, cfg)
    assert (sched.sum(1) == n_b).all()


def test_enable_ordering_follows_distance():
    cfg = ShiftMacConfig(8, 8)
    d = [-3, 0, 5]
    sched = enable_schedule(d, cfg)
    first = [int(np.argmax(r)) for r in sched]
    for i in range(3):
        for j in range(3):
            # a larger distance means a later start, by exactly the difference
            assert first[j] - first[i] == d[j] - d[i]


def test_trace_sign_extends():
    cfg = ShiftMacConfig(4, 4)
    _, bits = shift_mac_trace([-3], [2], cfg)
    # after the activation has been streamed, its sign bit keeps repeating
    assert bits[0, -1] == 1


def test_worked_examples():
    cfg = ShiftMacConfig(4, 4)
    assert shift_mac([-3], [2], cfg) == -12
    assert shift_mac([-4], [-1], cfg) == -2
    assert shift_mac([13, -6, 5], [-2, 0, 3], ShiftMacConfig(8, 4)) == 3 - 6 + 40


def test_all_zero_distance_is_plain_sum(rng):
    cfg = ShiftMacConfig(8, 4)
    a = rng.integers(-128, 128, (100, 16))
    assert np.array_equal(shift_mac_many(a, np.zeros_like(a), cfg), a.sum(1))


def test_distance_out_of_range():
    with pytest.raises(DistanceOutOfRange):
        shift_mac([1], [4], ShiftMacConfig(8, 4))
    with pytest.raises(DistanceOutOfRange):
        enable_schedule([-4], ShiftMacConfig(8, 4))


def test_activation_out_of_range():
    with pytest.raises(ValueError):
        shift_mac([8], [0], ShiftMacConfig(4, 4))


def test_k_limit():
    with pytest.raises(ValueError):
        shift_mac_many(np.zeros((1, 17), np.int64), 0, ShiftMacConfig(8, 4))


def test_growth_bits():
    assert [growth_bits(k) for k in (1, 2, 3, 4, 16)] == [1, 2, 3, 3, 5]


def test_signs():
    cfg = ShiftMacConfig(8, 4)
    assert shift_mac([10, 10], [1, 0], cfg, signs=[-1, 1]) == -10


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), k=st.integers(1, 16),
       n_b=st.sampled_from([4, 5, 8, 12]), d_max=st.sampled_from([2, 4, 8]))
def test_random_matches_floor_shift(seed, k, n_b, d_max):
    cfg = ShiftMacConfig(n_b, d_max)
    rng = np.random.default_rng(seed)
    a = rng.integers(-(1 << (n_b - 1)), 1 << (n_b - 1), (20, k))
    d = rng.integers(-cfg.D, cfg.D + 1, (20, k))
    neg = rng.random((20, k)) < 0.5
    zero = rng.random((20, k)) < 0.2
    got = shift_mac_many(a, d, cfg, neg=neg.astype(np.int8), zero=zero.astype(np.int8))
    s = np.where(zero, 0, np.where(neg, -1, 1))
    assert np.array_equal(got, floor_shift(s * a, d).sum(1))


def test_both_backends(backend, rng):
    cfg = ShiftMacConfig(8, 8)
    a = rng.integers(-128, 128, (500, 4))
    d = rng.integers(-7, 8, (500, 4))
    assert np.array_equal(shift_mac_many(a, d, cfg), floor_shift(a, d).sum(1))


def test_reads_do_not_depend_on_distance():
    cfg = ShiftMacConfig(8, 8)
    for d in (-7, 0, 7):
        led = EnergyLedger()
        shift_mac_many(np.full((3, 2), 5), [[d, 0]], cfg, ledger=led)
        assert led.counts["rt_read"] == 3 * 2 * 8

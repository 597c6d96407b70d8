import pytest
from hypothesis import given, settings, strategies as st

from rtsim.config import (ConfigError, SimConfig, SystemConfig, ceil_log2, default_config_text,
                          load_config, parse_config_text)
from rtsim.ledger import ENERGY_KEYS, EnergyLedger, LatencyLedger, merge_all


def test_hierarchy_capacities():
    s = SystemConfig()
    assert s.group_capacity == 128 * 1024
    assert s.mat_capacity == 8 * 1024
    assert s.subarray_capacity == 2 * 1024
    s.check_consistency(SimConfig().device)


def test_default_text_roundtrips():
    cfg = parse_config_text(default_config_text())
    assert cfg == SimConfig()


def test_labels_and_units():
    cfg = parse_config_text("RT write energy = 2000 fJ\nBank capacity = 2048 KB\n"
                            "Adder energy mode = write-shift\nRT shift latency = 0.5 ns\n")
    assert cfg.device.write_energy == pytest.approx(2.0)
    assert cfg.system.bank_capacity == 2 * 1024 ** 2
    assert cfg.adder.mode == "write_shift"


def test_inconsistent_check_label():
    with pytest.raises(ConfigError):
        parse_config_text("Mat capacity = 32 KB\n")


def test_unknown_key_and_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        parse_config_text("Flux capacitor = 1\n")
    with pytest.raises(ConfigError, match="nope.cfg"):
        load_config(tmp_path / "nope.cfg")


def test_clock_is_write_latency():
    assert SimConfig().clock_ns == 5.0
    lat = LatencyLedger.from_config(SimConfig())
    lat.add("adder", 8)
    assert lat.total_ns == 40.0


def test_ceil_log2():
    assert [ceil_log2(x) for x in (1, 2, 3, 4, 5, 16, 17)] == [0, 1, 2, 2, 3, 4, 5]


def test_unknown_event_rejected():
    with pytest.raises(KeyError):
        EnergyLedger().add("teleport")
    with pytest.raises(ValueError):
        EnergyLedger().add("rt_read", -1)


counts = st.dictionaries(st.sampled_from(ENERGY_KEYS), st.integers(0, 10 ** 6), max_size=6)


def _led(d):
    led = EnergyLedger()
    for k, v in d.items():
        led.add(k, v)
    return led


@settings(max_examples=80, deadline=None)
@given(counts)
def test_total_is_sum_of_count_times_unit(d):
    led = _led(d)
    assert led.total == pytest.approx(sum(v * led.unit_costs[k] for k, v in d.items()))


@settings(max_examples=80, deadline=None)
@given(counts, counts, counts)
def test_merge_commutative_associative(a, b, c):
    A, B, C = _led(a), _led(b), _led(c)
    assert A + B == B + A
    assert (A + B) + C == A + (B + C)
    assert merge_all([A, B, C]) == A + B + C


@settings(max_examples=40, deadline=None)
@given(counts, counts)
def test_delta_inverts_update(a, b):
    A = _led(a)
    before = A.copy()
    A.update(_led(b))
    assert A.delta(before) == _led(b)

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rtsim import kernels
from rtsim.booth import (BoothBlock, align_accumulate, booth_latency, booth_multiply,
                         booth_multiply_scalar, characterize, decode, gen_partial_products, recode)
from rtsim.config import SimConfig
from rtsim.ledger import EnergyLedger, LatencyLedger


def test_recode_worked_vector():
    assert [b.bits for b in recode("01101011")] == ["110", "101", "101", "011"]
    assert [b.factor for b in recode("01101011")] == [-1, -1, -1, 2]


def test_recode_zero():
    assert all(b.bits == "000" for b in recode(0, 8))


def test_recode_identity_exhaustive():
    for w in range(-128, 128):
        assert sum(b.factor * 4 ** i for i, b in enumerate(recode(w, 8))) == w


def test_recode_rejects_odd_width():
    with pytest.raises(ValueError):
        recode("101")


@pytest.mark.parametrize("bits,ctl", [
    ("011", (0, 0, 0, 1)),
    ("000", (1, 0, 0, 0)),
    ("100", (0, 1, 1, 1)),
    ("111", (1, 1, 0, 0)),
    ("001", (0, 0, 0, 0)),
    ("101", (0, 1, 1, 0)),
])
def test_decode_table(bits, ctl):
    c = decode(BoothBlock(*map(int, bits)))
    assert (c.zero, c.comp, c.incr, c.ls) == ctl


def test_control_consistency():
    for v in range(8):
        c = decode(BoothBlock(v >> 2 & 1, v >> 1 & 1, v & 1))
        assert not c.incr or c.comp


def test_partial_products():
    st_ = gen_partial_products(-45, [BoothBlock(0, 0, 1), BoothBlock(1, 0, 1), BoothBlock(0, 0, 0)], 8)
    assert st_.pp_tracks == [-45, 45, 0]


def test_worked_accumulation():
    # 107 recodes to (-1, -1, -1, +2)
    for m in (-128, -77, -1, 0, 1, 93, 127):
        st_ = gen_partial_products(m, recode(107, 8), 8)
        assert st_.offsets == [0, 2, 4, 7]
        assert align_accumulate(st_) == m * 107


def test_times_zero():
    for m in range(-128, 128, 17):
        assert booth_multiply_scalar(m, 0, 8) == 0


def test_exhaustive_8bit(backend):
    a, w = np.meshgrid(np.arange(-128, 128), np.arange(-128, 128), indexing="ij")
    assert np.array_equal(booth_multiply(a.ravel(), w.ravel(), 8), (a * w).ravel())


@settings(max_examples=200, deadline=None)
@given(st.integers(-2 ** 15, 2 ** 15 - 1), st.integers(-2 ** 15, 2 ** 15 - 1))
def test_sampled_16bit(a, w):
    assert booth_multiply(a, w, 16)[0] == a * w


@settings(max_examples=40, deadline=None)
@given(st.integers(-128, 127), st.integers(-128, 127))
def test_scalar_and_vector_paths_agree(a, w):
    cfg = SimConfig().with_mode("write_shift")
    l1, l2 = EnergyLedger.from_config(cfg), EnergyLedger.from_config(cfg)
    p1 = booth_multiply_scalar(a, w, 8, cfg.adder, l1)
    p2 = booth_multiply(a, w, 8, cfg.adder, l2)[0]
    assert p1 == p2 == a * w
    assert +l1.counts == +l2.counts


def test_latency_formula():
    for n in (4, 8, 16):
        lat = booth_latency(n)
        assert lat["generation"] == n + 1
        assert lat["multiply"] == 4 * n
        assert lat["mac"] == 6 * n
        assert booth_latency(n, overlap_alignment=True)["mac"] == 5 * n + 1
    led = LatencyLedger()
    booth_multiply(3, 5, 8, latency=led)
    assert led.cycles["booth"] == 32


def test_range_check():
    with pytest.raises(ValueError):
        booth_multiply(128, 1, 8)


def test_characterize_energy_grows_with_width():
    e = [characterize(n, "write_shift", samples=256)["energy_per_bit_pj"] for n in (4, 8, 16)]
    assert e[0] < e[1] < e[2]


def test_write_events_dominate_write_shift_booth():
    cfg = SimConfig().with_mode("write_shift")
    led = EnergyLedger.from_config(cfg)
    rng = np.random.default_rng(0)
    booth_multiply(rng.integers(-128, 128, 500), rng.integers(-128, 128, 500), 8, cfg.adder, led)
    assert led.energy("rt_write") / led.total > 0.5


def test_pp_track_events_per_product():
    led = EnergyLedger()
    booth_multiply(-45, 107, 8, ledger=led)
    # 4 partial products, each n+1 bits written
    assert led.counts["rt_write"] == 4 * 9
    assert led.tallies["booth_lane"] == 1
    assert kernels.booth([-45], [107], 8)[1][3] == 36

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rtsim.quantizer import (QuantSpec, QuantizedTensor, TensorFormatError, dequantize_linear,
                             from_bytes, from_json, load_tensor, log_to_fixed, quantize_linear,
                             quantize_log, quantize_tensor, save_tensor, to_bytes, to_json,
                             transpose_bit_parallel, xmax_sweep)


def test_endpoints():
    spec = QuantSpec(8, x_min=-2.0, x_max=3.0)
    assert quantize_linear(-2.0, spec) == 0
    assert quantize_linear(3.0, spec) == 255
    assert quantize_linear(-10.0, spec) == 0
    assert quantize_linear(10.0, spec) == 255


def test_tie_goes_away_from_zero():
    spec = QuantSpec(4, x_min=0.0, x_max=1.0)
    assert quantize_linear(0.5, spec) == 8
    neg = QuantSpec(4, x_min=-1.0, x_max=0.0)
    # level values -8/15 and -7/15; the tie keeps the one farther from zero
    assert quantize_linear(-0.5, neg) == 7


def test_log_examples():
    assert quantize_log(1.0, 4) == (1, 0, False)
    assert quantize_log(-0.3, 4) == (-1, -2, False)
    assert quantize_log(0.0, 4) == (0, 0, True)
    assert quantize_log(1000.0, 4)[1] == 3


@settings(max_examples=100, deadline=None)
@given(st.floats(-5, 5), st.integers(2, 16))
def test_linear_error_bound(x, n):
    spec = QuantSpec(n, x_min=-5.0, x_max=5.0)
    q = quantize_linear(x, spec)
    assert abs(float(dequantize_linear(q, spec)) - x) <= spec.delta / 2 + 1e-9


@settings(max_examples=100, deadline=None)
@given(st.floats(2 ** -3, 2 ** 3) | st.floats(-(2 ** 3), -(2 ** -3)))
def test_log_exponent_error(w):
    s, e, z = quantize_log(w, 8)
    assert not z and s == np.sign(w)
    assert abs(np.log2(abs(w)) - e) <= 0.5 + 1e-12


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=20), st.integers(2, 12))
def test_idempotence(xs, n):
    spec = QuantSpec(n)
    q = quantize_tensor(xs, spec)
    q2 = quantize_tensor(q.dequantize(), spec)
    assert np.array_equal(q.codes, q2.codes)


def test_signed_quantization():
    spec = QuantSpec(8, x_max=1.0, signed=True)
    q = quantize_tensor([-1.0, -0.5, 0.0, 1.0], spec)
    assert list(q.codes) == [-127, -64, 0, 127]
    with pytest.raises(ValueError):
        QuantSpec(8, x_min=-1.0, x_max=1.0, signed=True)


def test_transpose_shape_and_roundtrip(rng):
    spec = QuantSpec(8, x_max=1.0, signed=True)
    t = QuantizedTensor(spec, (4,), codes=rng.integers(-127, 128, 4))
    p = transpose_bit_parallel(t)
    assert p.codes.shape == (8, 4)
    assert set(np.unique(p.codes)) <= {0, 1}
    back = transpose_bit_parallel(p)
    assert np.array_equal(back.codes, t.codes)


def test_log_to_fixed():
    v, width = log_to_fixed([1, -1, 0], [-3, 2, 0], [False, False, True], 4)
    assert list(v) == [1, -32, 0] and width == 8


@pytest.mark.parametrize("spec", [QuantSpec(6, x_min=-1, x_max=2), QuantSpec(8, x_max=4, signed=True),
                                  QuantSpec(4, "logarithmic", d_max=8)])
def test_file_roundtrip(spec, rng, tmp_path):
    t = quantize_tensor(rng.normal(size=(3, 5)), spec)
    for f in (to_bytes, to_json):
        back = (from_bytes if f is to_bytes else from_json)(f(t))
        assert back.shape == t.shape and back.spec == t.spec
        assert np.array_equal(back.dequantize(), t.dequantize())
    for name in ("t.rtqt", "t.json"):
        save_tensor(tmp_path / name, t)
        assert np.array_equal(load_tensor(tmp_path / name).dequantize(), t.dequantize())


def test_bit_parallel_file_roundtrip(tmp_path):
    t = transpose_bit_parallel(quantize_tensor([[0.1, 0.9]], QuantSpec(4)))
    save_tensor(tmp_path / "p.rtqt", t)
    back = load_tensor(tmp_path / "p.rtqt")
    assert back.layout == "bit_parallel" and np.array_equal(back.codes, t.codes)


def test_missing_and_corrupt(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_tensor(tmp_path / "nope.rtqt")
    (tmp_path / "bad.rtqt").write_bytes(b"XXXX0000")
    with pytest.raises(TensorFormatError):
        load_tensor(tmp_path / "bad.rtqt")


def test_invalid_specs():
    with pytest.raises(ValueError):
        QuantSpec(8, x_min=1.0, x_max=1.0)
    with pytest.raises(ValueError):
        QuantSpec(4, "logarithmic")
    with pytest.raises(ValueError):
        QuantizedTensor(QuantSpec(4), (1,), codes=[16])


def test_xmax_sweep_has_minimum():
    x = np.random.default_rng(0).normal(0, 1, 2000)
    rows = xmax_sweep(x, 4)
    mse = [r["mse"] for r in rows]
    best = int(np.argmin(mse))
    assert 0 < best < len(rows) - 1

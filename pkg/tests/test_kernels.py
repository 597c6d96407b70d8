"""The numba and numpy kernels must agree on values, event counts and final MTJ state."""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rtsim import kernels

pytestmark = pytest.mark.skipif(len(kernels.available_backends()) < 2, reason="numba not installed")


def both(fn, *args, states=()):
    out = {}
    for b in ("numba", "numpy"):
        st_copy = [s.copy() for s in states]
        with kernels.use_backend(b):
            res = fn(*args, *st_copy)
        out[b] = (res, st_copy)
    return out


def assert_same(out):
    (r1, s1), (r2, s2) = out["numba"], out["numpy"]
    for x, y in zip(r1, r2):
        assert np.array_equal(x, y)
    for x, y in zip(s1, s2):
        assert np.array_equal(x, y)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), width=st.integers(1, 32), extend=st.booleans())
def test_serial_add_backends(seed, width, extend):
    rng = np.random.default_rng(seed)
    lo, hi = -(1 << (width - 1)), 1 << (width - 1)
    x, y = rng.integers(lo, hi, 50), rng.integers(lo, hi, 50)
    cin = rng.integers(0, 2, 50)
    st0 = rng.integers(0, 2, (50, 3)).astype(np.int8)
    out = both(lambda s: kernels.serial_add(x, y, width, cin, extend, s), states=[st0])
    assert_same(out)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), n=st.sampled_from([2, 4, 8, 12, 16]))
def test_booth_backends(seed, n):
    rng = np.random.default_rng(seed)
    lo, hi = -(1 << (n - 1)), 1 << (n - 1)
    a, w = rng.integers(lo, hi, 40), rng.integers(lo, hi, 40)
    sg = rng.integers(0, 2, (40, n // 2, 3)).astype(np.int8)
    sa = rng.integers(0, 2, (40, n // 2, 3)).astype(np.int8)
    out = both(lambda g, c: kernels.booth(a, w, n, g, c), states=[sg, sa])
    assert_same(out)
    assert np.array_equal(out["numpy"][0][0], a * w)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), k=st.integers(1, 16), n_b=st.sampled_from([4, 6, 8]),
       d_max=st.sampled_from([2, 4, 8]))
def test_shift_mac_backends(seed, k, n_b, d_max):
    from rtsim.shift_mac import ShiftMacConfig, growth_bits
    cfg = ShiftMacConfig(n_b, d_max)
    rng = np.random.default_rng(seed)
    a = rng.integers(-(1 << (n_b - 1)), 1 << (n_b - 1), (30, k))
    d = rng.integers(-cfg.D, cfg.D + 1, (30, k))
    neg = (rng.random((30, k)) < 0.5).astype(np.int8)
    zero = (rng.random((30, k)) < 0.2).astype(np.int8)
    tree = np.zeros((30, k - 1, 3), np.int8)
    comp = np.zeros((30, k, 3), np.int8)
    out = both(lambda t, c: kernels.shift_mac(a, d, neg, zero, n_b, cfg.D, cfg.counter_width,
                                              cfg.window_lo, growth_bits(k), t, c),
               states=[tree, comp])
    assert_same(out)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), k=st.integers(1, 16))
def test_tree_add_backends(seed, k):
    rng = np.random.default_rng(seed)
    x = rng.integers(-2 ** 31, 2 ** 31, (20, k))
    g = int(np.ceil(np.log2(k))) if k > 1 else 0
    out = both(lambda s: kernels.tree_add(x, 32, g, s), states=[np.zeros((20, k - 1, 3), np.int8)])
    assert_same(out)
    assert np.array_equal(out["numpy"][0][0], x.sum(1))


def test_backend_switching():
    assert kernels.backend() in kernels.available_backends()
    with kernels.use_backend("numpy"):
        assert kernels.backend() == "numpy"
    with pytest.raises(ValueError):
        kernels.set_backend("fortran")


def test_state_validation():
    with pytest.raises(ValueError):
        kernels.serial_add([1], [2], 4, state=np.zeros((1, 3), dtype=np.int64))

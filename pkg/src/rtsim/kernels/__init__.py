"""Backend dispatch for the bit-serial kernels.

The numba versions are used when numba imports and ``RTSIM_DISABLE_NUMBA`` is not
set to a true value; otherwise the pure-numpy versions run.  Both produce identical
results and event counts, so the choice only affects speed.
"""
from __future__ import annotations

import contextlib
import os

import numpy as np

from . import _numpy

_nb = None
if os.environ.get("RTSIM_DISABLE_NUMBA", "").strip().lower() not in ("1", "true", "yes", "on"):
    try:
        from . import _numba as _nb
    except ImportError:  # pragma: no cover - numba is a declared dependency
        _nb = None

_backend = "numba" if _nb is not None else "numpy"


def backend() -> str:
    return _backend


def available_backends() -> tuple[str, ...]:
    return ("numba", "numpy") if _nb is not None else ("numpy",)


def set_backend(name: str) -> None:
    global _backend
    if name not in available_backends():
        raise ValueError(f"backend {name!r} not available (have {available_backends()})")
    _backend = name


@contextlib.contextmanager
def use_backend(name: str):
    old = _backend
    set_backend(name)
    try:
        yield
    finally:
        set_backend(old)


def _impl():
    return _nb if _backend == "numba" else _numpy


def _i64(x):
    return np.ascontiguousarray(x, dtype=np.int64)


def _check_state(state, shape):
    if state.dtype != np.int8 or state.shape != shape or not state.flags.c_contiguous:
        raise ValueError(f"state must be a C-contiguous int8 array of shape {shape}")


def new_state(*shape) -> np.ndarray:
    """Input-MTJ state, all MTJs pre-aligned to 0."""
    return np.zeros(shape + (3,), dtype=np.int8)


def serial_add(x, y, width, cin=0, extend=True, state=None):
    x = _i64(x)
    y = _i64(y)
    m = x.shape[0]
    cin = _i64(np.broadcast_to(cin, (m,)))
    if state is None:
        state = new_state(m)
    _check_state(state, (m, 3))
    return _impl().serial_add(x, y, cin, int(width), bool(extend), state)


def booth(a, w, n, state_gen=None, state_acc=None):
    if n % 2 or n < 2:
        raise ValueError("Booth width must be even and >= 2")
    a = _i64(a)
    w = _i64(w)
    m = a.shape[0]
    if state_gen is None:
        state_gen = new_state(m, n // 2)
    if state_acc is None:
        state_acc = new_state(m, n // 2)
    _check_state(state_gen, (m, n // 2, 3))
    _check_state(state_acc, (m, n // 2, 3))
    return _impl().booth(a, w, int(n), state_gen, state_acc)


def shift_mac(acts, dists, neg, zero, n_b, D, width, lo, g, state_tree=None, state_comp=None):
    acts = np.ascontiguousarray(np.atleast_2d(np.asarray(acts, dtype=np.int64)))
    m, k = acts.shape
    dists = _i64(np.broadcast_to(dists, (m, k)))
    neg = np.ascontiguousarray(np.broadcast_to(neg, (m, k)), dtype=np.int8)
    zero = np.ascontiguousarray(np.broadcast_to(zero, (m, k)), dtype=np.int8)
    if state_tree is None:
        state_tree = new_state(m, k - 1)
    if state_comp is None:
        state_comp = new_state(m, k)
    _check_state(state_tree, (m, k - 1, 3))
    _check_state(state_comp, (m, k, 3))
    return _impl().shift_mac(acts, dists, neg, zero, int(n_b), int(D), int(width),
                             int(lo), int(g), state_tree, state_comp)


def tree_add(x, width, g, state=None):
    x = np.ascontiguousarray(np.atleast_2d(np.asarray(x, dtype=np.int64)))
    m, k = x.shape
    if state is None:
        state = new_state(m, k - 1)
    _check_state(state, (m, k - 1, 3))
    return _impl().tree_add(x, int(width), int(g), state)

"""Linear and power-of-two quantization, bit-parallel transposition and tensor files.

Linear quantization follows a uniform grid of 2^n levels between ``x_min`` and
``x_max``.  Signed tensors (weights, activations) are quantized on magnitude with
``x_min = 0`` and n-1 magnitude bits, then the sign is put back, so codes are n-bit
two's complement integers.  Power-of-two weights are (sign, exponent, is_zero).
"""
from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"RTQT"
VERSION = 1
_DTYPES = {1: np.int8, 2: np.int16, 3: np.int32, 4: np.int64, 5: np.uint8}
_DTYPE_CODES = {np.dtype(v): k for k, v in _DTYPES.items()}
_LOG_DTYPE = 6  # interleaved (sign i8, exponent i8, is_zero u8) triples
_SCHEMES = ("linear", "logarithmic")
_LAYOUTS = ("bit_serial", "bit_parallel")
_HEADER = struct.Struct("<4sBBBBBBBdd B")


class TensorFormatError(ValueError):
    pass


@dataclass(frozen=True)
class QuantSpec:
    n_bits: int
    scheme: str = "linear"
    x_min: float = 0.0
    x_max: float = 1.0
    d_max: int | None = None
    signed: bool = False

    def __post_init__(self):
        if self.scheme == "log":
            object.__setattr__(self, "scheme", "logarithmic")
        if self.scheme not in _SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.n_bits < 1 or self.n_bits > 32:
            raise ValueError("n_bits must be in 1..32")
        if not self.x_min < self.x_max:
            raise ValueError("x_min must be below x_max")
        if self.scheme == "logarithmic":
            if self.d_max is None or self.d_max < 1:
                raise ValueError("logarithmic scheme needs d_max >= 1")
        if self.signed and self.scheme == "linear":
            if self.x_min != 0.0:
                raise ValueError("signed linear tensors quantize magnitude with x_min = 0")
            if self.n_bits < 2:
                raise ValueError("signed tensors need at least 2 bits")

    @property
    def levels(self) -> int:
        return 1 << self.n_bits

    @property
    def magnitude_bits(self) -> int:
        return self.n_bits - 1 if self.signed else self.n_bits

    @property
    def delta(self) -> float:
        return (self.x_max - self.x_min) / ((1 << self.magnitude_bits) - 1)


def _round_half_away(r: np.ndarray, level_value) -> np.ndarray:
    base = np.floor(r)
    frac = r - base
    tie = np.isclose(frac, 0.5, rtol=0, atol=1e-9)
    up = frac > 0.5
    # on a tie keep the level whose value is farther from zero
    far_up = np.abs(level_value(base + 1)) >= np.abs(level_value(base))
    return np.where(tie, np.where(far_up, base + 1, base), np.where(up, base + 1, base))


def quantize_linear(x, spec: QuantSpec):
    """Nearest level code in [0, 2^n); out-of-range values clamp to the end levels."""
    if spec.scheme != "linear":
        raise ValueError("quantize_linear needs a linear spec")
    nb = spec.magnitude_bits
    top = (1 << nb) - 1
    xa = np.asarray(x, dtype=np.float64)
    r = (xa - spec.x_min) * top / (spec.x_max - spec.x_min)
    r = np.clip(r, 0, top)
    code = _round_half_away(r, lambda k: spec.x_min + k * spec.delta)
    code = np.clip(code, 0, top).astype(np.int64)
    return int(code) if np.ndim(x) == 0 else code


def dequantize_linear(code, spec: QuantSpec):
    return spec.x_min + np.asarray(code, dtype=np.float64) * spec.delta


def _round_away(v):
    return np.sign(v) * np.floor(np.abs(v) + 0.5)


def quantize_log(w, d_max: int):
    """(sign, exponent, is_zero) with exponent = round(log2|w|) clamped to ±(d_max-1)."""
    wa = np.asarray(w, dtype=np.float64)
    zero = wa == 0
    with np.errstate(divide="ignore"):
        e = _round_away(np.log2(np.where(zero, 1.0, np.abs(wa))))
    lim = d_max - 1
    e = np.clip(e, -lim, lim).astype(np.int64)
    sign = np.where(zero, 0, np.where(wa < 0, -1, 1)).astype(np.int64)
    e = np.where(zero, 0, e)
    if np.ndim(w) == 0:
        return int(sign), int(e), bool(zero)
    return sign, e, zero


@dataclass
class QuantizedTensor:
    spec: QuantSpec
    shape: tuple[int, ...]
    codes: np.ndarray | None = None  # linear: integer codes
    sign: np.ndarray | None = None  # logarithmic
    exponent: np.ndarray | None = None
    is_zero: np.ndarray | None = None
    layout: str = "bit_serial"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.shape = tuple(int(s) for s in self.shape)
        if self.layout not in _LAYOUTS:
            raise ValueError(f"unknown layout {self.layout!r}")
        if self.spec.scheme == "linear":
            if self.codes is None:
                raise ValueError("linear tensor needs codes")
            self.codes = np.asarray(self.codes, dtype=np.int64)
            if self.layout == "bit_serial":
                self.codes = self.codes.reshape(self.shape)
                lo, hi = self.code_range
                if self.codes.size and (self.codes.min() < lo or self.codes.max() > hi):
                    raise ValueError("codes out of range for the spec")
        else:
            if self.sign is None or self.exponent is None or self.is_zero is None:
                raise ValueError("logarithmic tensor needs sign, exponent and is_zero")
            self.sign = np.asarray(self.sign, dtype=np.int64).reshape(self.shape)
            self.exponent = np.asarray(self.exponent, dtype=np.int64).reshape(self.shape)
            self.is_zero = np.asarray(self.is_zero, dtype=bool).reshape(self.shape)
            lim = self.spec.d_max - 1
            if self.exponent.size and np.abs(self.exponent).max() > lim:
                raise ValueError("exponent outside ±(d_max-1)")

    @property
    def code_range(self) -> tuple[int, int]:
        if self.spec.signed:
            m = (1 << (self.spec.n_bits - 1)) - 1
            return -m, m
        return 0, (1 << self.spec.n_bits) - 1

    def integers(self) -> np.ndarray:
        """Integer operand values as the hardware sees them."""
        if self.layout != "bit_serial":
            raise ValueError("transpose back to bit_serial first")
        if self.spec.scheme == "linear":
            return self.codes.copy()
        raise ValueError("power-of-two tensors have no plain integer form; use log_fields()")

    def log_fields(self):
        return self.sign, self.exponent, self.is_zero

    def dequantize(self) -> np.ndarray:
        if self.spec.scheme == "linear":
            if self.spec.signed:
                return self.codes * self.spec.delta
            return dequantize_linear(self.codes, self.spec)
        return np.where(self.is_zero, 0.0, self.sign * np.exp2(self.exponent.astype(float)))


def quantize_tensor(x, spec: QuantSpec) -> QuantizedTensor:
    x = np.asarray(x, dtype=np.float64)
    if spec.scheme == "logarithmic":
        s, e, z = quantize_log(x, spec.d_max)
        return QuantizedTensor(spec, x.shape, sign=s, exponent=e, is_zero=z)
    if spec.signed:
        mag = quantize_linear(np.abs(x), spec)
        codes = np.where(x < 0, -mag, mag)
    else:
        codes = quantize_linear(x, spec)
    return QuantizedTensor(spec, x.shape, codes=np.asarray(codes, dtype=np.int64))


def log_to_fixed(sign, exponent, is_zero, d_max: int) -> tuple[np.ndarray, int]:
    """Power-of-two weights as integers ±2^(e + d_max - 1) and the Booth width they need.

    A product with these integers must be shifted right by d_max - 1 afterwards.
    """
    D = d_max - 1
    s = np.asarray(sign, dtype=np.int64)
    e = np.asarray(exponent, dtype=np.int64)
    v = np.where(np.asarray(is_zero), 0, s * (np.int64(1) << (e + D)))
    return v, 2 * D + 2


def transpose_bit_parallel(t: QuantizedTensor) -> QuantizedTensor:
    """Swap between per-word storage and bit planes (plane b holds bit b of every word).

    Plane b is the strip that holds bit b of every word of a group; the word index is
    the position along the strip.
    """
    if t.spec.scheme != "linear":
        raise ValueError("only linear (integer) tensors have a bit-parallel layout")
    n = t.spec.n_bits
    if t.layout == "bit_serial":
        u = t.codes & ((1 << n) - 1)
        planes = ((u[None, ...] >> np.arange(n).reshape((n,) + (1,) * u.ndim)) & 1)
        return QuantizedTensor(t.spec, t.shape, codes=planes.astype(np.int64),
                               layout="bit_parallel", meta=dict(t.meta))
    planes = t.codes.reshape((n,) + t.shape)
    u = (planes << np.arange(n).reshape((n,) + (1,) * len(t.shape))).sum(axis=0)
    if t.spec.signed:
        u = np.where(u >> (n - 1) == 1, u - (1 << n), u)
    return QuantizedTensor(t.spec, t.shape, codes=u.astype(np.int64), layout="bit_serial",
                           meta=dict(t.meta))


def xmax_sweep(x, n_bits: int, candidates=(1, 2, 4, 8, 16, 32)) -> list[dict]:
    """Quantization error of signed linear quantization for each power-of-two x_max."""
    x = np.asarray(x, dtype=np.float64)
    rows = []
    for xm in candidates:
        spec = QuantSpec(n_bits, "linear", 0.0, float(xm), signed=True)
        q = quantize_tensor(x, spec)
        err = q.dequantize() - x
        rows.append({"x_max": float(xm), "mse": float(np.mean(err ** 2)) if x.size else 0.0,
                     "clipped": float(np.mean(np.abs(x) > xm)) if x.size else 0.0})
    return rows


# ---- tensor files -------------------------------------------------------

def _payload(t: QuantizedTensor):
    if t.spec.scheme == "logarithmic":
        trip = np.stack([t.sign.astype(np.int8), t.exponent.astype(np.int8),
                         t.is_zero.astype(np.int8)], axis=-1)
        return _LOG_DTYPE, t.shape, trip.astype("<i1").tobytes(order="C")
    shape = t.codes.shape
    if t.layout == "bit_parallel":
        dt = np.uint8
    else:
        lo, hi = (int(t.codes.min()), int(t.codes.max())) if t.codes.size else (0, 0)
        dt = next(d for d in (np.int8, np.int16, np.int32, np.int64)
                  if np.iinfo(d).min <= lo and hi <= np.iinfo(d).max)
    code = _DTYPE_CODES[np.dtype(dt)]
    return code, shape, t.codes.astype(np.dtype(dt).newbyteorder("<")).tobytes(order="C")


def to_bytes(t: QuantizedTensor) -> bytes:
    dcode, shape, payload = _payload(t)
    head = _HEADER.pack(MAGIC, VERSION, dcode, _SCHEMES.index(t.spec.scheme),
                        _LAYOUTS.index(t.layout), int(t.spec.signed), t.spec.n_bits,
                        t.spec.d_max or 0, t.spec.x_min, t.spec.x_max, len(shape))
    dims = struct.pack(f"<{len(shape)}I", *shape)
    return head + dims + payload


def from_bytes(buf: bytes) -> QuantizedTensor:
    if len(buf) < _HEADER.size or buf[:4] != MAGIC:
        raise TensorFormatError("not an RTQT tensor file (bad magic)")
    (magic, ver, dcode, scheme, layout, signed, n_bits, d_max, x_min, x_max,
     rank) = _HEADER.unpack_from(buf, 0)
    if ver != VERSION:
        raise TensorFormatError(f"unsupported tensor file version {ver}")
    off = _HEADER.size
    dims = struct.unpack_from(f"<{rank}I", buf, off)
    off += 4 * rank
    count = int(np.prod(dims)) if rank else 1
    spec = QuantSpec(n_bits, _SCHEMES[scheme], x_min, x_max, d_max or None, bool(signed))
    lay = _LAYOUTS[layout]
    if dcode == _LOG_DTYPE:
        need = 3 * count
        if len(buf) - off != need:
            raise TensorFormatError("payload size does not match header")
        trip = np.frombuffer(buf, dtype="<i1", count=need, offset=off).reshape(tuple(dims) + (3,))
        return QuantizedTensor(spec, dims, sign=trip[..., 0], exponent=trip[..., 1],
                               is_zero=trip[..., 2].astype(bool), layout=lay)
    if dcode not in _DTYPES:
        raise TensorFormatError(f"unknown dtype code {dcode}")
    dt = np.dtype(_DTYPES[dcode]).newbyteorder("<")
    if len(buf) - off != dt.itemsize * count:
        raise TensorFormatError("payload size does not match header")
    codes = np.frombuffer(buf, dtype=dt, count=count, offset=off).astype(np.int64).reshape(dims)
    shape = dims[1:] if lay == "bit_parallel" else dims
    return QuantizedTensor(spec, shape, codes=codes, layout=lay)


def to_json(t: QuantizedTensor) -> str:
    d = {"format": "rtqt-json", "version": VERSION, "scheme": t.spec.scheme,
         "n_bits": t.spec.n_bits, "d_max": t.spec.d_max, "x_min": t.spec.x_min,
         "x_max": t.spec.x_max, "signed": t.spec.signed, "layout": t.layout,
         "shape": list(t.shape)}
    if t.spec.scheme == "logarithmic":
        d["sign"] = t.sign.ravel().tolist()
        d["exponent"] = t.exponent.ravel().tolist()
        d["is_zero"] = [int(v) for v in t.is_zero.ravel()]
    else:
        d["codes"] = t.codes.ravel().tolist()
    return json.dumps(d, indent=1) + "\n"


def from_json(text: str) -> QuantizedTensor:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise TensorFormatError(f"bad tensor JSON: {e}") from None
    if d.get("format") != "rtqt-json":
        raise TensorFormatError("not an rtqt-json tensor")
    spec = QuantSpec(d["n_bits"], d["scheme"], d["x_min"], d["x_max"], d.get("d_max"),
                     d.get("signed", False))
    shape = tuple(d["shape"])
    if spec.scheme == "logarithmic":
        return QuantizedTensor(spec, shape, sign=d["sign"], exponent=d["exponent"],
                               is_zero=d["is_zero"], layout=d["layout"])
    codes = np.asarray(d["codes"], dtype=np.int64)
    if d["layout"] == "bit_parallel":
        codes = codes.reshape((spec.n_bits,) + shape)
    return QuantizedTensor(spec, shape, codes=codes, layout=d["layout"])


def save_tensor(path, t: QuantizedTensor) -> None:
    p = Path(path)
    if p.suffix == ".json":
        p.write_text(to_json(t))
    else:
        p.write_bytes(to_bytes(t))


def load_tensor(path) -> QuantizedTensor:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"tensor file not found: {p}")
    if p.suffix == ".json":
        return from_json(p.read_text())
    return from_bytes(p.read_bytes())


def from_integers(values, n_bits: int, signed: bool = True, x_max: float = 1.0) -> QuantizedTensor:
    """Wrap already-quantized integer codes in a tensor."""
    spec = QuantSpec(n_bits, "linear", 0.0, x_max, signed=signed)
    v = np.asarray(values, dtype=np.int64)
    return QuantizedTensor(spec, v.shape, codes=v)


def log_tensor(sign, exponent, is_zero, d_max: int, n_bits: int | None = None) -> QuantizedTensor:
    n_bits = n_bits or 1 + max(1, math.ceil(math.log2(2 * d_max - 1)))
    spec = QuantSpec(n_bits, "logarithmic", 0.0, float(2 ** (d_max - 1)), d_max, True)
    s = np.asarray(sign)
    return QuantizedTensor(spec, s.shape, sign=s, exponent=exponent, is_zero=is_zero)


def with_layout(t: QuantizedTensor, layout: str) -> QuantizedTensor:
    if t.layout == layout:
        return t
    return transpose_bit_parallel(t)


__all__ = [
    "QuantSpec", "QuantizedTensor", "quantize_linear", "dequantize_linear", "quantize_log",
    "quantize_tensor", "transpose_bit_parallel", "log_to_fixed", "xmax_sweep", "save_tensor",
    "load_tensor", "to_bytes", "from_bytes", "to_json", "from_json", "from_integers",
    "log_tensor", "with_layout", "TensorFormatError",
]

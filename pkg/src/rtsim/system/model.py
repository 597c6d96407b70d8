"""Model descriptions, builders for the reference networks, and whole-model runs."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import reference
from ..config import SimConfig
from ..ledger import EnergyLedger, LatencyLedger
from ..quantizer import load_tensor
from .placement import LayerShape, place_conv_layer

LAYER_KINDS = ("conv", "fc", "pool", "bn", "flatten")


@dataclass
class Layer:
    kind: str
    name: str = ""
    in_shape: tuple = ()
    out_shape: tuple = ()
    act_bits: int = 8
    # conv / fc
    weights: np.ndarray | None = None
    sign: np.ndarray | None = None
    exponent: np.ndarray | None = None
    is_zero: np.ndarray | None = None
    bias: np.ndarray | None = None
    stride: int = 1
    relu: bool = True
    shift: int = 0
    weight_bits: int = 8
    weight_scheme: str = "linear"
    d_max: int = 8
    engine: str = "booth"
    mat_groups: int | None = None
    # pool
    size: int = 2
    pool: str = "avg"
    # batch norm
    mu: np.ndarray | None = None
    gamma: np.ndarray | None = None
    beta: np.ndarray | None = None
    frac_bits: int = 6

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ValueError(f"unknown layer type {self.kind!r}")
        if self.weight_scheme == "log":
            self.weight_scheme = "logarithmic"

    @property
    def log(self) -> bool:
        return self.weight_scheme == "logarithmic"

    @property
    def log_fields(self):
        return self.sign, self.exponent, self.is_zero

    @property
    def weight_shape(self) -> tuple:
        if self.kind == "conv":
            C = self.in_shape[0]
            return (self.out_shape[0], C, self.kernel[0], self.kernel[1])
        if self.kind == "fc":
            return (self.out_shape[0], self.in_shape[0])
        return ()

    @property
    def kernel(self) -> tuple[int, int]:
        C, H, W = self.in_shape
        _, D, E = self.out_shape
        return H - (D - 1) * self.stride, W - (E - 1) * self.stride

    @property
    def conv_shape(self) -> LayerShape:
        if self.kind == "fc":
            return LayerShape(self.in_shape[0], 1, 1, self.out_shape[0], 1, 1, 1)
        C, H, W = self.in_shape
        P, Q = self.kernel
        return LayerShape(C, H, W, self.out_shape[0], P, Q, self.stride)

    @property
    def macs(self) -> int:
        return self.conv_shape.macs if self.kind in ("conv", "fc") else 0

    @property
    def params(self) -> int:
        if self.kind in ("conv", "fc"):
            return int(np.prod(self.weight_shape)) + self.out_shape[0]
        if self.kind == "bn":
            return 4 * self.in_shape[0]
        return 0


@dataclass
class Model:
    name: str
    input_shape: tuple
    layers: list[Layer] = field(default_factory=list)
    act_bits: int = 8

    @property
    def params(self) -> int:
        return sum(l.params for l in self.layers)

    @property
    def macs(self) -> int:
        return sum(l.macs for l in self.layers)

    def summary(self) -> list[dict]:
        return [{"name": l.name, "type": l.kind, "in": list(l.in_shape), "out": list(l.out_shape),
                 "params": l.params, "macs": l.macs} for l in self.layers]


def _out_shape(kind: str, shape: tuple, spec: dict) -> tuple:
    if kind == "conv":
        C, H, W = shape
        k, u = spec.get("kernel", 3), spec.get("stride", 1)
        if (H - k) % u or (W - k) % u:
            raise ValueError(f"stride {u} does not tile a {H}x{W} input with kernel {k}")
        return (spec["filters"], (H - k) // u + 1, (W - k) // u + 1)
    if kind == "pool":
        C, H, W = shape
        s = spec.get("size", 2)
        return (C, H // s, W // s)
    if kind == "fc":
        return (spec["out"],)
    if kind == "flatten":
        return (int(np.prod(shape)),)
    return shape


def build_model(desc: dict, seed: int = 0, base_dir: str | Path | None = None,
                calibrate: bool = True) -> Model:
    """Model from a description dict; weights come from tensor files or the seed."""
    rng = np.random.default_rng(seed)
    act_bits = int(desc.get("act_bits", 8))
    defaults = {k: desc[k] for k in ("weight_bits", "weight_scheme", "d_max", "engine", "mat_groups")
                if k in desc}
    model = Model(desc.get("name", "model"), tuple(desc["input_shape"]), act_bits=act_bits)
    shape = model.input_shape
    for i, spec in enumerate(desc["layers"]):
        kind = spec["type"]
        opts = {**defaults, **{k: v for k, v in spec.items() if k in defaults}}
        out = _out_shape(kind, shape, spec)
        layer = Layer(kind, spec.get("name", f"{kind}{i}"), shape, out, act_bits=act_bits,
                      stride=spec.get("stride", 1), relu=spec.get("relu", True),
                      size=spec.get("size", 2), pool=spec.get("kind", "avg"), **opts)
        if kind in ("conv", "fc"):
            if kind == "fc" and len(shape) != 1:
                raise ValueError(f"layer {layer.name}: fc needs a flat input, got {shape}")
            _init_weights(layer, rng, spec, base_dir)
        elif kind == "bn":
            _init_bn(layer, rng, spec)
        model.layers.append(layer)
        shape = out
    if calibrate:
        calibrate_shifts(model, random_input(model, seed))
    return model


def _init_weights(layer: Layer, rng, spec: dict, base_dir):
    ws = layer.weight_shape
    F = ws[0]
    if "weights" in spec:
        t = load_tensor(Path(base_dir or ".") / spec["weights"])
        if tuple(t.shape) != ws:
            raise ValueError(f"layer {layer.name}: weight tensor shape {t.shape} != {ws}")
        if t.spec.scheme == "linear":
            layer.weights, layer.weight_scheme = t.integers(), "linear"
        else:
            layer.sign, layer.exponent, layer.is_zero = t.log_fields()
            layer.weight_scheme, layer.d_max = "logarithmic", t.spec.d_max
    elif layer.log:
        D = layer.d_max - 1
        layer.sign = rng.choice(np.array([-1, 1]), ws)
        # mostly small weights, like a trained layer
        layer.exponent = np.clip(-rng.geometric(0.5, ws) + 1, -D, D).astype(np.int64)
        layer.exponent = np.where(rng.random(ws) < 0.1, rng.integers(-D, D + 1, ws), layer.exponent)
        layer.is_zero = rng.random(ws) < 0.1
        layer.sign = np.where(layer.is_zero, 0, layer.sign)
        layer.exponent = np.where(layer.is_zero, 0, layer.exponent)
    else:
        m = (1 << (layer.weight_bits - 1)) - 1
        layer.weights = rng.integers(-m, m + 1, ws)
    if "bias" in spec:
        layer.bias = load_tensor(Path(base_dir or ".") / spec["bias"]).integers().reshape(F)
    else:
        b = 1 << (layer.act_bits + 1)
        layer.bias = rng.integers(-b, b + 1, F)


def _init_bn(layer: Layer, rng, spec: dict):
    C = layer.in_shape[0]
    m = (1 << (layer.act_bits - 1)) - 1
    layer.frac_bits = int(spec.get("frac_bits", layer.act_bits - 2))
    layer.mu = rng.integers(-m // 4, m // 4 + 1, C)
    g = 1 << layer.frac_bits
    layer.gamma = rng.integers(g // 2, g + g // 2, C)
    layer.beta = rng.integers(-m // 8, m // 8 + 1, C)


def random_input(model: Model, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed + 1)
    m = (1 << (model.act_bits - 1)) - 1
    return rng.integers(0, m + 1, model.input_shape)


def calibrate_shifts(model: Model, x) -> None:
    """Smallest power-of-two rescale per layer that keeps its outputs in range."""
    m = (1 << (model.act_bits - 1)) - 1
    for layer in model.layers:
        if layer.kind in ("conv", "fc") and layer.relu:
            layer.shift = 0
            acc = reference.layer_reference(_no_relu(layer), x)
            peak = int(max(acc.max(initial=0), 1))
            while (peak >> layer.shift) > m:
                layer.shift += 1
        x = reference.layer_reference(layer, x)


def _no_relu(layer: Layer) -> Layer:
    from dataclasses import replace
    return replace(layer, relu=False)


# -- reference networks -----------------------------------------------------

def lenet5_desc(act_bits=8, weight_bits=8, weight_scheme="linear", d_max=8, engine="booth",
                pool="avg") -> dict:
    return {
        "name": "lenet5", "input_shape": [1, 32, 32], "act_bits": act_bits,
        "weight_bits": weight_bits, "weight_scheme": weight_scheme, "d_max": d_max,
        "engine": engine, "mat_groups": 8,
        "layers": [
            {"type": "conv", "name": "conv1", "filters": 6, "kernel": 5},
            {"type": "pool", "name": "pool1", "size": 2, "kind": pool},
            {"type": "conv", "name": "conv2", "filters": 16, "kernel": 5},
            {"type": "pool", "name": "pool2", "size": 2, "kind": pool},
            {"type": "flatten", "name": "flatten"},
            {"type": "fc", "name": "fc1", "out": 120},
            {"type": "fc", "name": "fc2", "out": 84},
            {"type": "fc", "name": "fc3", "out": 10, "relu": False},
        ],
    }


def lenet5(seed: int = 0, **kw) -> Model:
    return build_model(lenet5_desc(**kw), seed=seed)


def resnet20_shapes() -> list[LayerShape]:
    """Convolution shapes of a CIFAR ResNet-20 with the 1-pixel padding folded into H, W."""
    shapes = [LayerShape(3, 34, 34, 16, 3, 3, 1)]
    for C, F, H in ((16, 16, 32), (16, 32, 16), (32, 64, 8)):
        for i in range(3):
            first = i == 0 and C != F
            cin = C if i == 0 else F
            if first:
                shapes.append(LayerShape(cin, 2 * H + 1, 2 * H + 1, F, 3, 3, 2))
            else:
                shapes.append(LayerShape(cin, H + 2, H + 2, F, 3, 3, 1))
            shapes.append(LayerShape(F, H + 2, H + 2, F, 3, 3, 1))
    return shapes


def resnet20_placement_audit(cfg: SimConfig | None = None, engine: str = "booth",
                             n_b: int = 8) -> list[dict]:
    rows = []
    for i, s in enumerate(resnet20_shapes()):
        pl = place_conv_layer(s, cfg, n_b=n_b, engine=engine, mat_groups=16)
        rows.append({"layer": i, "C": s.C, "F": s.F, "groups_used": pl.groups_used,
                     "parallel_multiplications": pl.groups_used * (cfg or SimConfig()).system.multiplier_blocks_per_group,
                     "duplicates": pl.duplicates, "experimental": pl.experimental})
    return rows


# -- description files ------------------------------------------------------

def load_model(path: str | Path, seed: int = 0) -> Model:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"model file not found: {p}")
    try:
        desc = json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise ValueError(f"{p}: invalid model description ({e})") from None
    return build_model(desc, seed=seed, base_dir=p.parent)


def run_inference(model: Model, x, cfg: SimConfig | None = None,
                  ledger: EnergyLedger | None = None, latency: LatencyLedger | None = None,
                  engine: str | None = None, verify: bool = False):
    """Run all layers through the simulator; returns (logits, report dict)."""
    from .engine import run_layer

    cfg = cfg or SimConfig()
    ledger = ledger if ledger is not None else EnergyLedger.from_config(cfg)
    latency = latency if latency is not None else LatencyLedger.from_config(cfg)
    per_layer = []
    x = np.asarray(x, dtype=np.int64)
    for layer in model.layers:
        before, lat_before = ledger.copy(), latency.total_cycles
        y = run_layer(layer, x, cfg, ledger, latency, engine=engine)
        if verify:
            want = reference.layer_reference(layer, x)
            if not np.array_equal(y, want):
                bad = int(np.count_nonzero(y != want))
                raise AssertionError(f"layer {layer.name}: {bad} outputs differ from the oracle")
        d = ledger.delta(before)
        per_layer.append({"name": layer.name, "type": layer.kind, "macs": layer.macs,
                          "energy_pj": d.total, "cycles": latency.total_cycles - lat_before})
        x = y
    report = {"model": model.name, "macs": model.macs, "params": model.params,
              "energy_pj": ledger.total, "cycles": latency.total_cycles,
              "latency_ns": latency.total_ns, "events": dict(sorted(ledger.counts.items())),
              "tallies": dict(sorted(ledger.tallies.items())), "layers": per_layer}
    return x, report

"""DRAM traffic, batching analysis and efficiency reports.

The energy and latency ledgers themselves live in :mod:`rtsim.ledger`; this module
turns finished ledgers into metrics and models off-chip transfers.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

from .config import SimConfig
from .ledger import ENERGY_KEYS, EnergyLedger, LatencyLedger

MiB = 1 << 20
DRAM_POLICIES = ("stream", "batch_resident")


@dataclass(frozen=True)
class LayerTraffic:
    name: str
    kind: str  # conv | pool | fc
    params: int  # parameter count, bias included
    in_elems: int
    out_elems: int


@dataclass
class DramModel:
    """Off-chip transfer model for one chip.

    ``stream``: a batch moves through a layer one image at a time, so a layer needs
    its input for the current image plus the outputs of the whole batch on chip.
    ``batch_resident``: inputs and outputs of all B images must be on chip together.
    Whatever does not fit is written out and read back.
    """
    weight_capacity: int = 16 * MiB
    activation_capacity: int = 16 * MiB
    batch: int = 1
    policy: str = "stream"
    bits_per_param: int = 8
    bits_per_activation: int = 8
    energy_per_bit_pj: float = 70.0

    def __post_init__(self):
        if self.batch < 1:
            raise ValueError("batch size must be >= 1")
        if self.policy not in DRAM_POLICIES:
            raise ValueError(f"unknown DRAM policy {self.policy!r} (use {DRAM_POLICIES})")

    @classmethod
    def from_config(cls, cfg: SimConfig, banks: int = 16, **kw) -> "DramModel":
        # half of the banks hold weights, half activations
        cap = cfg.system.bank_capacity * banks // 2
        return cls(weight_capacity=cap, activation_capacity=cap,
                   energy_per_bit_pj=cfg.system.dram_energy_per_bit, **kw)


def dram_accesses_per_frame(summary: list[LayerTraffic], B: int | None = None,
                            model: DramModel | None = None) -> dict[str, float]:
    """Bytes moved per image, split into parameters and activations."""
    model = model or DramModel()
    B = model.batch if B is None else B
    if B < 1:
        raise ValueError("batch size must be >= 1")
    pb, ab = model.bits_per_param / 8, model.bits_per_activation / 8
    conv = sum(l.params for l in summary if l.kind != "fc") * pb
    fc = sum(l.params for l in summary if l.kind == "fc") * pb
    # the resident part is loaded once per batch; the rest streams once per batch
    resident = min(conv, model.weight_capacity)
    params = (resident + (conv - resident) + fc) / B
    cap = model.activation_capacity
    spill = 0.0
    for l in summary:
        i, o = l.in_elems * ab, l.out_elems * ab
        need = B * o + i if model.policy == "stream" else B * (i + o)
        spill += max(0.0, need - cap) * 2
    acts = spill / B
    return {"parameters": params, "activations": acts, "total": params + acts,
            "energy_pj": (params + acts) * 8 * model.energy_per_bit_pj}


def vgg16_summary(input_hw: int = 224, classes: int = 1000) -> list[LayerTraffic]:
    plan = [64, 64, "M", 128, 128, "M", 256, 256, 256, "M",
            512, 512, 512, "M", 512, 512, 512, "M"]
    out, C, H = [], 3, input_hw
    conv_i = pool_i = 0
    for v in plan:
        if v == "M":
            pool_i += 1
            out.append(LayerTraffic(f"pool{pool_i}", "pool", 0, C * H * H, C * (H // 2) ** 2))
            H //= 2
        else:
            conv_i += 1
            # same padding keeps H
            out.append(LayerTraffic(f"conv{conv_i}", "conv", 9 * C * v + v, C * H * H, v * H * H))
            C = v
    n = C * H * H
    for i, o in enumerate((4096, 4096, classes), 1):
        out.append(LayerTraffic(f"fc{i}", "fc", n * o + o, n, o))
        n = o
    return out


def batch_sweep(batches, scheme: str = "fixed", policy: str = "stream") -> list[dict]:
    """Per-frame traffic for each batch size; log weights are stored in 4 bits."""
    bits = 4 if scheme in ("log", "logarithmic") else 8
    summ = vgg16_summary()
    rows = []
    base = None
    for B in batches:
        m = DramModel(batch=B, policy=policy, bits_per_param=bits)
        r = dram_accesses_per_frame(summ, B, m)
        base = base if base is not None else dram_accesses_per_frame(summ, 1, DramModel(
            batch=1, policy=policy, bits_per_param=bits))["total"]
        rows.append({"batch": B, "parameters_mb": r["parameters"] / 1e6,
                     "activations_mb": r["activations"] / 1e6, "total_mb": r["total"] / 1e6,
                     "reduction": 1 - r["total"] / base})
    return rows


# -- efficiency reports -----------------------------------------------------

@dataclass
class EfficiencyReport:
    energy_pj: float
    latency_ns: float
    macs: int
    area_mm2: float
    breakdown_pj: dict[str, float] = field(default_factory=dict)

    @property
    def macs_per_s(self) -> float:
        return self.macs / (self.latency_ns * 1e-9) if self.latency_ns and self.macs else 0.0

    @property
    def macs_per_s_mm2(self) -> float:
        return self.macs_per_s / self.area_mm2 if self.area_mm2 else 0.0

    @property
    def pj_per_mac(self) -> float:
        return self.energy_pj / self.macs if self.macs else 0.0

    @property
    def breakdown_pct(self) -> dict[str, float]:
        if not self.energy_pj:
            return {k: 0.0 for k in self.breakdown_pj}
        return {k: 100.0 * v / self.energy_pj for k, v in self.breakdown_pj.items()}

    @property
    def write_share(self) -> float:
        """Fraction of energy spent on data and MTJ writes."""
        if not self.energy_pj:
            return 0.0
        return (self.breakdown_pj.get("rt_write", 0) + self.breakdown_pj.get("mtj_write", 0)) / self.energy_pj

    def metrics(self) -> dict[str, float]:
        m = {"energy_pj": self.energy_pj, "latency_ns": self.latency_ns, "macs": self.macs,
             "macs_per_s": self.macs_per_s, "macs_per_s_mm2": self.macs_per_s_mm2,
             "pj_per_mac": self.pj_per_mac, "area_mm2": self.area_mm2}
        m.update({f"pct_{k}": v for k, v in self.breakdown_pct.items()})
        return m


def efficiency_report(energy: EnergyLedger, latency: LatencyLedger,
                      area_config: SimConfig | None = None, macs: int = 0) -> EfficiencyReport:
    cfg = area_config or SimConfig()
    if macs == 0:
        return EfficiencyReport(0.0, 0.0, 0, cfg.system.area_mm2(),
                                {k: 0.0 for k in ENERGY_KEYS})
    return EfficiencyReport(energy.total, latency.total_ns, int(macs), cfg.system.area_mm2(),
                            energy.breakdown())


def to_json(report: EfficiencyReport, extra: dict | None = None) -> str:
    d = {"metrics": report.metrics(), "breakdown_pj": report.breakdown_pj}
    if extra:
        d.update(extra)
    return json.dumps(d, indent=2, sort_keys=True) + "\n"


def to_text(report: EfficiencyReport) -> str:
    rows = [(k, f"{v:.6g}") for k, v in report.metrics().items()]
    w = max(len(k) for k, _ in rows)
    return "".join(f"{k:<{w}}  {v:>14}\n" for k, v in rows)


def to_csv(rows: list[tuple[str, str, float]]) -> str:
    """One line per (config, metric, value)."""
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["config", "metric", "value"])
    for r in rows:
        wr.writerow([r[0], r[1], f"{r[2]:.10g}" if isinstance(r[2], float) else r[2]])
    return buf.getvalue()

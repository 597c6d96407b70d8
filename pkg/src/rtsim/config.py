"""Device, adder and hierarchy parameters plus the flat key/value config loader.

Config files are plain text, one ``label = value [unit]`` per line.  Labels can be
either the table-style names used in the device literature (``RT write energy``,
``No. of MU ports``) or the dataclass field names (``write_energy``).  ``#`` starts
a comment.  Units are converted to the internal ones: pJ for device energies, fJ for
adder energies, ns for latencies, ps for logic delays and bytes for capacities.
"""
from __future__ import annotations

import dataclasses
import math
import re
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DeviceParams:
    write_energy: float = 1.0  # pJ per MTJ / domain write
    shift_energy: float = 0.051  # pJ per strip shift
    read_energy: float = 0.0  # pJ per port read (not characterized, see notes)
    write_latency: float = 5.0  # ns
    shift_latency: float = 0.5  # ns
    domains_per_track: int = 64
    tracks_per_mu: int = 4
    ports_per_mu: int = 16
    domain_length: float = 2.0  # F
    track_width: float = 1.0  # F
    track_length: float = 128.0  # F
    cmos_width: float = 10.0  # F
    cmos_height: float = 4.0  # F
    overhead_multiplier: int = 1

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "read_energy":
                if v < 0:
                    raise ConfigError("read_energy must be non-negative")
                continue
            if not v > 0:
                raise ConfigError(f"{f.name} must be strictly positive, got {v}")
        if self.ports_per_mu % self.tracks_per_mu:
            raise ConfigError("ports_per_mu must be divisible by tracks_per_mu")
        if self.domains_per_track % self.ports_per_track:
            raise ConfigError("domains_per_track must be a multiple of ports per track")

    @property
    def ports_per_track(self) -> int:
        return self.ports_per_mu // self.tracks_per_mu

    @property
    def domains_per_port(self) -> int:
        return self.domains_per_track // self.ports_per_track

    @property
    def overhead_capacity(self) -> int:
        return self.domains_per_port * self.overhead_multiplier

    @property
    def mu_bytes(self) -> int:
        return self.domains_per_track * self.tracks_per_mu // 8


@dataclass(frozen=True)
class AdderEnergyModel:
    logic_energy_fa: float = 19.0  # fJ
    logic_energy_ha: float = 16.1  # fJ
    mtj_writes_fa: int = 7
    mtj_writes_ha: int = 4
    logic_delay_fa: float = 240.0  # ps
    logic_delay_ha: float = 153.0  # ps
    mode: str = "baseline"
    # (0.392 - 0.376) pJ spread over the 7 input MTJs of a full adder
    shift_control_energy: float = 16.0 / 7.0  # fJ per input-MTJ shift

    def __post_init__(self):
        mode = self.mode.replace("-", "_")
        if mode not in ("baseline", "write_shift"):
            raise ConfigError(f"unknown adder energy mode {self.mode!r}")
        object.__setattr__(self, "mode", mode)
        for name in ("logic_energy_fa", "logic_energy_ha", "shift_control_energy",
                     "logic_delay_fa", "logic_delay_ha"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if self.mtj_writes_fa != 7 or self.mtj_writes_ha != 4:
            raise ConfigError("adder MTJ input counts are fixed at 7 (FA) and 4 (HA)")

    @property
    def write_shift(self) -> bool:
        return self.mode == "write_shift"


@dataclass(frozen=True)
class SystemConfig:
    bank_capacity: int = 2 * 1024 * 1024
    mat_groups_per_bank: int = 16
    mats_per_group: int = 16
    subarrays_per_mat: int = 4
    subarray_mu_rows: int = 16
    subarray_mu_cols: int = 4
    adders_per_activation_mat: int = 2
    multiplier_blocks_per_group: int = 2
    banks: int = 1
    acc_bits: int = 32
    dram_energy_per_bit: float = 70.0  # pJ
    bank_area_mm2: float = 0.92
    chip_area_16_banks_mm2: float = 14.74

    def __post_init__(self):
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise ConfigError(f"{f.name} must be strictly positive")

    @property
    def group_capacity(self) -> int:
        return self.bank_capacity // self.mat_groups_per_bank

    @property
    def mat_capacity(self) -> int:
        return self.group_capacity // self.mats_per_group

    @property
    def subarray_capacity(self) -> int:
        return self.mat_capacity // self.subarrays_per_mat

    @property
    def mus_per_subarray(self) -> int:
        return self.subarray_mu_rows * self.subarray_mu_cols

    @property
    def activation_mats_per_group(self) -> int:
        return self.mats_per_group // 2

    def check_consistency(self, device: DeviceParams) -> None:
        want = self.mus_per_subarray * device.mu_bytes
        if want != self.subarray_capacity:
            raise ConfigError(
                f"subarray capacity {self.subarray_capacity} B does not match "
                f"{self.mus_per_subarray} MUs x {device.mu_bytes} B")

    def area_mm2(self) -> float:
        if self.banks == 16:
            return self.chip_area_16_banks_mm2
        return self.bank_area_mm2 * self.banks


@dataclass(frozen=True)
class SimConfig:
    device: DeviceParams = field(default_factory=DeviceParams)
    adder: AdderEnergyModel = field(default_factory=AdderEnergyModel)
    system: SystemConfig = field(default_factory=SystemConfig)

    @property
    def clock_ns(self) -> float:
        # the adders are bound by MU writes, so one cycle is one write
        return self.device.write_latency

    def with_mode(self, mode: str) -> "SimConfig":
        return replace(self, adder=replace(self.adder, mode=mode))

    def to_dict(self) -> dict[str, dict[str, Any]]:
        return {
            "device": dataclasses.asdict(self.device),
            "adder": dataclasses.asdict(self.adder),
            "system": dataclasses.asdict(self.system),
        }


# label -> (section, field, unit kind)
_LABELS: dict[str, tuple[str, str, str]] = {
    "rt write energy": ("device", "write_energy", "pj"),
    "rt shift energy": ("device", "shift_energy", "pj"),
    "rt read energy": ("device", "read_energy", "pj"),
    "rt write latency": ("device", "write_latency", "ns"),
    "rt shift latency": ("device", "shift_latency", "ns"),
    "no. of domains per rt": ("device", "domains_per_track", "int"),
    "no. of rts": ("device", "tracks_per_mu", "int"),
    "no. of rts per mu": ("device", "tracks_per_mu", "int"),
    "no. of mu ports": ("device", "ports_per_mu", "int"),
    "domain length": ("device", "domain_length", "f"),
    "rt width": ("device", "track_width", "f"),
    "rt length": ("device", "track_length", "f"),
    "access cmos width": ("device", "cmos_width", "f"),
    "access cmos height": ("device", "cmos_height", "f"),
    "overhead multiplier": ("device", "overhead_multiplier", "int"),
    "fa logic energy": ("adder", "logic_energy_fa", "fj"),
    "ha logic energy": ("adder", "logic_energy_ha", "fj"),
    "fa mtj writes": ("adder", "mtj_writes_fa", "int"),
    "ha mtj writes": ("adder", "mtj_writes_ha", "int"),
    "fa logic delay": ("adder", "logic_delay_fa", "ps"),
    "ha logic delay": ("adder", "logic_delay_ha", "ps"),
    "adder energy mode": ("adder", "mode", "str"),
    "shift control energy": ("adder", "shift_control_energy", "fj"),
    "bank capacity": ("system", "bank_capacity", "bytes"),
    "mat groups/bank": ("system", "mat_groups_per_bank", "int"),
    "mat groups per bank": ("system", "mat_groups_per_bank", "int"),
    "mats/mat group": ("system", "mats_per_group", "int"),
    "mats per mat group": ("system", "mats_per_group", "int"),
    "subarrays/mat": ("system", "subarrays_per_mat", "int"),
    "subarrays per mat": ("system", "subarrays_per_mat", "int"),
    "adders per activation mat": ("system", "adders_per_activation_mat", "int"),
    "multiplier blocks per mat group": ("system", "multiplier_blocks_per_group", "int"),
    "no. of banks": ("system", "banks", "int"),
    "accumulator bits": ("system", "acc_bits", "int"),
    "dram energy": ("system", "dram_energy_per_bit", "pj"),
    "bank area": ("system", "bank_area_mm2", "float"),
    # derived capacities, checked against the hierarchy rather than stored
    "mat group capacity": ("check", "group_capacity", "bytes"),
    "mat capacity": ("check", "mat_capacity", "bytes"),
    "subarray capacity": ("check", "subarray_capacity", "bytes"),
    "mus/subarray": ("check", "mus_per_subarray", "grid"),
    "no. of ports per rt": ("check", "ports_per_track", "int"),
    "mu capacity": ("check", "mu_bytes", "bytes"),
    "rt capacity": ("check", "track_bytes", "bytes"),
}

_UNIT_SCALE = {
    "pj": {"pj": 1.0, "fj": 1e-3, "nj": 1e3, "": 1.0},
    "fj": {"fj": 1.0, "pj": 1e3, "": 1.0},
    "ns": {"ns": 1.0, "ps": 1e-3, "us": 1e3, "": 1.0},
    "ps": {"ps": 1.0, "ns": 1e3, "": 1.0},
    "bytes": {"b": 1, "kb": 1024, "mb": 1024 ** 2, "gb": 1024 ** 3, "": 1},
    "f": {"f": 1.0, "": 1.0},
}

_VALUE_RE = re.compile(r"^\s*([-+]?[0-9]*\.?[0-9]+(?:[eE][-+]?\d+)?)\s*([A-Za-z]*)\s*$")


def _norm_label(label: str) -> str:
    return re.sub(r"\s+", " ", label.strip().lower())


def _convert(raw: str, kind: str, label: str) -> Any:
    if kind == "str":
        return raw.strip()
    if kind == "grid":
        m = re.match(r"^\s*(\d+)\s*[x×]\s*(\d+)\s*$", raw)
        if not m:
            raise ConfigError(f"{label}: expected RxC, got {raw!r}")
        return int(m.group(1)) * int(m.group(2))
    m = _VALUE_RE.match(raw)
    if not m:
        raise ConfigError(f"{label}: cannot parse value {raw!r}")
    num, unit = float(m.group(1)), m.group(2).lower()
    if kind in ("int", "float"):
        if unit:
            raise ConfigError(f"{label}: unexpected unit {unit!r}")
        if kind == "int":
            if num != int(num):
                raise ConfigError(f"{label}: expected an integer, got {raw!r}")
            return int(num)
        return num
    scale = _UNIT_SCALE[kind]
    if unit not in scale:
        raise ConfigError(f"{label}: unit {unit!r} not valid here")
    val = num * scale[unit]
    if kind == "bytes":
        return int(round(val))
    return val


def _field_kinds() -> dict[str, tuple[str, str]]:
    out = {}
    for section, cls in (("device", DeviceParams), ("adder", AdderEnergyModel),
                         ("system", SystemConfig)):
        for f in fields(cls):
            kind = {"int": "int", "float": "float", "str": "str"}.get(
                f.type if isinstance(f.type, str) else f.type.__name__, "float")
            out[f.name] = (section, kind)
    return out


def parse_config_text(text: str, base: SimConfig | None = None) -> SimConfig:
    base = base or SimConfig()
    updates: dict[str, dict[str, Any]] = {"device": {}, "adder": {}, "system": {}}
    checks: list[tuple[str, str, Any]] = []
    by_field = _field_kinds()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        nk = _norm_label(key)
        if nk in _LABELS:
            section, name, kind = _LABELS[nk]
        elif key in by_field:
            section, kind = by_field[key]
            name = key
            # bare field names take numbers in internal units
            if kind == "float" and _VALUE_RE.match(raw) and _VALUE_RE.match(raw).group(2):
                raise ConfigError(f"line {lineno}: field {key} takes a bare number")
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        value = _convert(raw, kind, key)
        if section == "check":
            checks.append((name, key, value))
        else:
            updates[section][name] = value
    cfg = SimConfig(
        device=replace(base.device, **updates["device"]),
        adder=replace(base.adder, **updates["adder"]),
        system=replace(base.system, **updates["system"]),
    )
    cfg.system.check_consistency(cfg.device)
    for name, key, value in checks:
        if name == "track_bytes":
            have = cfg.device.domains_per_track // 8
        elif hasattr(cfg.system, name):
            have = getattr(cfg.system, name)
        else:
            have = getattr(cfg.device, name)
        if have != value:
            raise ConfigError(f"{key} = {value} is inconsistent with the hierarchy ({have})")
    return cfg


def load_config(path: str | Path | None) -> SimConfig:
    if path is None:
        return SimConfig()
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    return parse_config_text(p.read_text())


def default_config_text() -> str:
    d, a, s = DeviceParams(), AdderEnergyModel(), SystemConfig()
    return "\n".join([
        "# racetrack device",
        f"RT write energy = {d.write_energy} pJ",
        f"RT write latency = {d.write_latency} ns",
        f"RT shift energy = {d.shift_energy} pJ",
        f"RT shift latency = {d.shift_latency * 1000:g} ps",
        f"RT read energy = {d.read_energy} pJ",
        f"No. of domains per RT = {d.domains_per_track}",
        f"Domain length = {d.domain_length:g} F",
        f"RT width = {d.track_width:g} F",
        f"RT length = {d.track_length:g} F",
        "# macro unit",
        f"No. of RTs = {d.tracks_per_mu}",
        f"No. of MU ports = {d.ports_per_mu}",
        f"No. of ports per RT = {d.ports_per_track}",
        f"MU capacity = {d.mu_bytes} B",
        f"RT capacity = {d.domains_per_track // 8} B",
        f"Access CMOS width = {d.cmos_width:g} F",
        f"Access CMOS height = {d.cmos_height:g} F",
        "# hierarchy",
        f"Bank capacity = {s.bank_capacity // 1024 ** 2} MB",
        f"Mat groups/bank = {s.mat_groups_per_bank}",
        f"Mat group capacity = {s.group_capacity // 1024} KB",
        f"Mats/mat group = {s.mats_per_group}",
        f"Mat capacity = {s.mat_capacity // 1024} KB",
        f"Subarrays/mat = {s.subarrays_per_mat}",
        f"MUs/subarray = {s.subarray_mu_rows}x{s.subarray_mu_cols}",
        f"Subarray capacity = {s.subarray_capacity // 1024} KB",
        f"Accumulator bits = {s.acc_bits}",
        f"DRAM energy = {s.dram_energy_per_bit:g} pJ",
        "# adders",
        f"FA logic energy = {a.logic_energy_fa:g} fJ",
        f"HA logic energy = {a.logic_energy_ha:g} fJ",
        f"FA logic delay = {a.logic_delay_fa:g} ps",
        f"HA logic delay = {a.logic_delay_ha:g} ps",
        f"FA MTJ writes = {a.mtj_writes_fa}",
        f"HA MTJ writes = {a.mtj_writes_ha}",
        f"Shift control energy = {a.shift_control_energy!r} fJ",
        f"Adder energy mode = {a.mode}",
        "",
    ])


def ceil_log2(x: int) -> int:
    return 0 if x <= 1 else math.ceil(math.log2(x))

"""Command-line front end: ``rtsim simulate | quantize | sweep | report``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .booth import characterize
from .config import ConfigError, load_config
from .cost_model import (EfficiencyReport, batch_sweep, efficiency_report, to_csv, to_json,
                         to_text)
from .ledger import ENERGY_KEYS, EnergyLedger, LatencyLedger
from .quantizer import (QuantSpec, TensorFormatError, from_integers, load_tensor,
                        quantize_tensor, save_tensor)
from .reference import reference_inference
from .system import CapacityExceeded, build_model, lenet5_desc, load_model, run_inference
from .system.model import random_input

SWEEP_AXES = ("bit_width", "d_max", "batch", "engine", "energy_mode")
BUILTIN_MODELS = {"lenet5": lenet5_desc}


class CliError(Exception):
    pass


def _mode(s: str) -> str:
    return s.replace("-", "_")


def _model_from_args(args, bits=None, d_max=None, engine=None):
    bits = bits or args.bits
    d_max = d_max or args.dmax
    engine = engine or args.engine
    scheme = "log" if engine == "shift" else args.scheme
    if args.model is None or args.model in BUILTIN_MODELS:
        desc = BUILTIN_MODELS[args.model or "lenet5"](
            act_bits=bits, weight_bits=bits, weight_scheme=scheme, d_max=d_max, engine=engine)
        return build_model(desc, seed=args.seed)
    return load_model(args.model, seed=args.seed)


def _run(args, cfg, model, engine):
    if getattr(args, "inputs", None):
        x = load_tensor(args.inputs).integers()
        if tuple(x.shape) != tuple(model.input_shape):
            raise CliError(f"{args.inputs}: input shape {x.shape} != model input {model.input_shape}")
    else:
        x = random_input(model, args.seed)
    led, lat = EnergyLedger.from_config(cfg), LatencyLedger.from_config(cfg)
    y, rep = run_inference(model, x, cfg, led, lat, engine=engine, verify=args.verify)
    eff = efficiency_report(led, lat, cfg, model.macs)
    return x, y, rep, led, lat, eff


def cmd_simulate(args) -> int:
    cfg = load_config(args.config).with_mode(_mode(args.energy_mode))
    model = _model_from_args(args)
    x, y, rep, led, lat, eff = _run(args, cfg, model, args.engine)
    if args.verify:
        want = reference_inference(model, x)
        if not np.array_equal(want, y):
            raise CliError("simulated outputs differ from the reference oracle")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_tensor(out / "outputs.rtqt", from_integers(y, cfg.system.acc_bits, x_max=1.0))
    extra = {"model": model.name, "engine": args.engine, "energy_mode": cfg.adder.mode,
             "seed": args.seed, "verified": bool(args.verify), "latency": lat.to_dict(),
             "layers": rep["layers"], "outputs": [int(v) for v in np.ravel(y)],
             "dram": _model_dram(model, args.batch, cfg)}
    (out / "report.json").write_text(to_json(eff, extra))
    (out / "report.txt").write_text(to_text(eff))
    events = [("counts", k, int(v)) for k, v in led.to_dict()["counts"].items()]
    events += [("tallies", k, int(v)) for k, v in sorted(led.tallies.items())]
    events += [("cycles", k, int(v)) for k, v in sorted(lat.cycles.items())]
    (out / "events.csv").write_text(to_csv(events))
    print(f"{model.name}: {eff.energy_pj / 1e6:.4f} uJ, {eff.latency_ns / 1e3:.2f} us, "
          f"{eff.pj_per_mac:.3f} pJ/MAC -> {out}")
    return 0


def _model_dram(model, B: int, cfg) -> dict:
    # small models stay on chip: weights are fetched once per batch, nothing spills
    wbits = sum(l.params * (l.weight_bits if l.kind in ("conv", "fc") else model.act_bits)
                for l in model.layers)
    per_frame = wbits / 8 / B
    return {"batch": B, "bytes_per_frame": per_frame,
            "energy_pj_per_frame": per_frame * 8 * cfg.system.dram_energy_per_bit}


def _load_array(path: str) -> np.ndarray:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"input file not found: {p}")
    if p.suffix == ".npy":
        return np.load(p)
    if p.suffix == ".json":
        return np.asarray(json.loads(p.read_text()), dtype=float)
    return np.loadtxt(p, dtype=float, ndmin=1)


def cmd_quantize(args) -> int:
    x = _load_array(args.inputs)
    if args.scheme == "log":
        spec = QuantSpec(args.bits, "logarithmic", 0.0, 1.0, args.dmax, True)
    else:
        # an explicit --xmin asks for the unsigned affine range [xmin, xmax]
        signed = args.xmin is None and bool(np.any(x < 0))
        x_max = args.xmax if args.xmax is not None else float(np.abs(x).max() or 1.0)
        x_min = 0.0 if args.xmin is None else args.xmin
        spec = QuantSpec(args.bits, "linear", x_min, x_max, signed=signed)
    t = quantize_tensor(x, spec)
    dest = Path(args.out)
    if dest.suffix not in (".json", ".rtqt"):
        dest.mkdir(parents=True, exist_ok=True)
        dest = dest / "tensor.rtqt"
    dest.parent.mkdir(parents=True, exist_ok=True)
    save_tensor(dest, t)
    print(f"wrote {dest}")
    return 0


def _parse_values(axis: str, raw: str | None) -> list:
    if raw is None:
        defaults = {"bit_width": "4,8,16", "d_max": "4,8,16", "batch": "1,2,4,8,16,32,64",
                    "engine": "booth,shift", "energy_mode": "baseline,write_shift"}
        raw = defaults[axis]
    vals = [v.strip() for v in raw.split(",") if v.strip()]
    if axis in ("bit_width", "d_max", "batch"):
        return [int(v) for v in vals]
    if axis == "energy_mode":
        return [_mode(v) for v in vals]
    return vals


def _sweep_point(args, axis, v, cfg):
    if axis == "bit_width" and args.workload == "booth":
        r = characterize(v, cfg.adder.mode, samples=args.samples, seed=args.seed, cfg=cfg)
        return {"energy_pj": r["energy_pj"], "energy_per_bit_pj": r["energy_per_bit_pj"],
                "latency_cycles": r["latency_cycles"]}
    if axis == "batch":
        scheme = "log" if args.scheme == "log" or args.engine == "shift" else "fixed"
        r = batch_sweep([1, v], scheme)[1]
        return {k: r[k] for k in ("parameters_mb", "activations_mb", "total_mb", "reduction")}
    kw = {}
    if axis == "bit_width":
        kw["bits"] = v
    elif axis == "d_max":
        kw["d_max"] = v
    elif axis == "engine":
        kw["engine"] = v
    elif axis == "energy_mode":
        cfg = cfg.with_mode(v)
    engine = kw.get("engine", args.engine)
    model = _model_from_args(args, **kw)
    _, _, _, _, _, eff = _run(args, cfg, model, engine)
    return eff.metrics()


def cmd_sweep(args) -> int:
    cfg = load_config(args.config).with_mode(_mode(args.energy_mode))
    vals = _parse_values(args.axis, args.values)
    rows = [(v, _sweep_point(args, args.axis, v, cfg)) for v in vals]
    metrics: list[str] = []
    for _, m in rows:
        metrics += [k for k in m if k not in metrics]
    if not rows:
        metrics = _empty_metrics(args)
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow([args.axis] + metrics)
    for v, m in rows:
        wr.writerow([v] + [f"{m[k]:.10g}" if isinstance(m.get(k), float) else m.get(k, "")
                           for k in metrics])
    _emit(args.out, "sweep.csv", buf.getvalue())
    return 0


def _empty_metrics(args) -> list[str]:
    if args.axis == "bit_width" and args.workload == "booth":
        return ["energy_pj", "energy_per_bit_pj", "latency_cycles"]
    if args.axis == "batch":
        return ["parameters_mb", "activations_mb", "total_mb", "reduction"]
    return list(EfficiencyReport(0.0, 0.0, 0, 0.0, {k: 0.0 for k in ENERGY_KEYS}).metrics())


def _emit(out: str | None, name: str, text: str) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
        return
    p = Path(out)
    if p.suffix == "":
        p.mkdir(parents=True, exist_ok=True)
        p = p / name
    else:
        p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text)
    print(f"wrote {p}")


def cmd_report(args) -> int:
    src = Path(args.run)
    if src.is_dir():
        src = src / "report.json"
    if not src.is_file():
        raise FileNotFoundError(f"report not found: {src}")
    data = json.loads(src.read_text())
    m = data["metrics"]
    if args.format == "json":
        text = json.dumps(m, indent=2, sort_keys=True) + "\n"
    elif args.format == "csv":
        cfg = f"{data.get('model', '?')}/{data.get('engine', '?')}/{data.get('energy_mode', '?')}"
        text = to_csv([(cfg, k, v) for k, v in m.items()])
    else:
        w = max(len(k) for k in m)
        text = "".join(f"{k:<{w}}  {v:>14.6g}\n" for k, v in m.items())
    _emit(args.out, f"report.{args.format}", text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key-value device/system config file")
    common.add_argument("--model", help="model description (JSON) or a built-in name: lenet5")
    common.add_argument("--engine", choices=("booth", "shift"), default="booth")
    common.add_argument("--energy-mode", choices=("baseline", "write-shift", "write_shift"),
                        default="write-shift")
    common.add_argument("--scheme", choices=("linear", "log"), default="linear",
                        help="weight quantization of built-in models")
    common.add_argument("--batch", type=int, default=1)
    common.add_argument("--bits", type=int, default=8)
    common.add_argument("--dmax", type=int, default=8)
    common.add_argument("--verify", action="store_true",
                        help="check every layer against the integer oracle")
    common.add_argument("--seed", type=int, default=0)

    p = argparse.ArgumentParser(prog="rtsim", description="Racetrack in-memory CNN simulator")
    p.add_argument("--version", action="version", version=f"rtsim {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="run one inference")
    s.add_argument("--inputs", help="input activation tensor file")
    s.add_argument("--out", default="rtsim_out", help="output directory")
    s.set_defaults(func=cmd_simulate)

    q = sub.add_parser("quantize", parents=[common], help="quantize a float array to a tensor file")
    q.add_argument("inputs", help=".npy, .json or whitespace text array")
    q.add_argument("--xmin", type=float)
    q.add_argument("--xmax", type=float)
    q.add_argument("--out", default="rtsim_out")
    q.set_defaults(func=cmd_quantize)

    w = sub.add_parser("sweep", parents=[common], help="sweep one axis, CSV output")
    w.add_argument("--axis", choices=SWEEP_AXES, required=True)
    w.add_argument("--values", help="comma-separated points; empty string gives a header-only CSV")
    w.add_argument("--workload", choices=("booth", "lenet"), default="booth",
                   help="bit_width sweeps: single Booth unit or the LeNet model")
    w.add_argument("--samples", type=int, default=2048)
    w.add_argument("--out", help="output file or directory (stdout if omitted)")
    w.set_defaults(func=cmd_sweep)

    r = sub.add_parser("report", help="re-emit a simulate report")
    r.add_argument("run", help="simulate output directory or report.json")
    r.add_argument("--format", choices=("text", "json", "csv"), default="text")
    r.add_argument("--out", help="output file or directory (stdout if omitted)")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "batch", 1) < 1:
            raise CliError("--batch must be >= 1")
        return args.func(args)
    except (CliError, ConfigError, CapacityExceeded, TensorFormatError, FileNotFoundError,
            ValueError, KeyError, AssertionError) as e:
        msg = e.args[0] if isinstance(e, KeyError) and e.args else e
        print(f"rtsim: error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

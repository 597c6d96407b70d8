import json

import numpy as np
import pytest

from rtsim.config import SimConfig
from rtsim.cost_model import (DramModel, EfficiencyReport, LayerTraffic, batch_sweep,
                              dram_accesses_per_frame, efficiency_report, to_csv, to_json,
                              to_text, vgg16_summary)
from rtsim.ledger import EnergyLedger, LatencyLedger
from rtsim.system import lenet5, run_inference
from rtsim.system.model import random_input


def test_vgg16_size():
    s = vgg16_summary()
    conv = sum(l.params for l in s if l.kind == "conv")
    fc = sum(l.params for l in s if l.kind == "fc")
    assert conv == 14_714_688 and fc == 123_642_856


def test_small_layers_never_spill():
    summ = [LayerTraffic("c", "conv", 100, 1000, 1000)]
    for policy in ("stream", "batch_resident"):
        r = dram_accesses_per_frame(summ, 1, DramModel(policy=policy))
        assert r["activations"] == 0 and r["parameters"] == 100


def test_parameters_amortize_with_batch():
    s = vgg16_summary()
    p = [dram_accesses_per_frame(s, b)["parameters"] for b in (1, 2, 4, 8)]
    assert np.allclose(np.array(p) * [1, 2, 4, 8], p[0])


def test_batch_resident_spills_more():
    s = vgg16_summary()
    a = dram_accesses_per_frame(s, 8, DramModel(policy="stream"))["activations"]
    b = dram_accesses_per_frame(s, 8, DramModel(policy="batch_resident"))["activations"]
    assert b >= a


def test_batch_sweep_log_halves_parameters():
    f, l = batch_sweep([1], "fixed")[0], batch_sweep([1], "log")[0]
    assert l["parameters_mb"] == pytest.approx(f["parameters_mb"] / 2)
    assert f["reduction"] == 0


def test_invalid_dram():
    with pytest.raises(ValueError):
        DramModel(batch=0)
    with pytest.raises(ValueError):
        DramModel(policy="magic")


def test_zero_macs_report():
    r = efficiency_report(EnergyLedger(), LatencyLedger(), macs=0)
    m = r.metrics()
    assert m["energy_pj"] == 0 and m["macs_per_s"] == 0 and m["pj_per_mac"] == 0


def _lenet_report(mode="write_shift"):
    cfg = SimConfig().with_mode(mode)
    m = lenet5(seed=1)
    led, lat = EnergyLedger.from_config(cfg), LatencyLedger.from_config(cfg)
    run_inference(m, random_input(m, 1), cfg, led, lat)
    return efficiency_report(led, lat, cfg, m.macs)


def test_breakdown_sums_to_100():
    r = _lenet_report()
    assert sum(r.breakdown_pct.values()) == pytest.approx(100, abs=0.01)
    assert r.pj_per_mac > 0 and r.macs_per_s_mm2 > 0


def test_write_share_dominates_write_shift_booth():
    assert _lenet_report().write_share > 0.5


def test_serializers():
    r = EfficiencyReport(10.0, 5.0, 2, 1.0, {"rt_write": 6.0, "rt_read": 4.0})
    d = json.loads(to_json(r, {"x": 1}))
    assert d["metrics"]["pct_rt_write"] == 60 and d["x"] == 1
    assert "pj_per_mac" in to_text(r)
    assert to_csv([("a", "m", 1.5)]).splitlines() == ["config,metric,value", "a,m,1.5"]

import csv
import io
import json

import numpy as np
import pytest

from rtsim.cli import main
from rtsim.quantizer import load_tensor


ONE_LAYER = {"name": "tiny", "input_shape": [2, 6, 6],
             "layers": [{"type": "conv", "filters": 2, "kernel": 3}]}


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_simulate_one_layer(tmp_path, capsys):
    (tmp_path / "m.json").write_text(json.dumps(ONE_LAYER))
    code, _, _ = run(["simulate", "--model", str(tmp_path / "m.json"), "--verify",
                      "--out", str(tmp_path / "r")], capsys)
    assert code == 0
    rep = json.loads((tmp_path / "r" / "report.json").read_text())
    assert rep["metrics"]["macs"] == 2 * 2 * 9 * 16 and rep["verified"]
    assert load_tensor(tmp_path / "r" / "outputs.rtqt").shape == (2, 4, 4)


def test_missing_tensor_file(tmp_path, capsys):
    desc = json.loads(json.dumps(ONE_LAYER))
    desc["layers"][0]["weights"] = "w_missing.rtqt"
    (tmp_path / "m.json").write_text(json.dumps(desc))
    code, _, err = run(["simulate", "--model", str(tmp_path / "m.json"),
                        "--out", str(tmp_path / "r")], capsys)
    assert code != 0 and "w_missing.rtqt" in err


def test_same_seed_same_bytes(tmp_path, capsys):
    (tmp_path / "m.json").write_text(json.dumps(ONE_LAYER))
    for d in ("a", "b"):
        assert run(["simulate", "--model", str(tmp_path / "m.json"), "--seed", "3",
                    "--out", str(tmp_path / d)], capsys)[0] == 0
    for f in ("report.json", "events.csv", "outputs.rtqt"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_sweep_bit_width(capsys):
    code, out, _ = run(["sweep", "--axis", "bit_width", "--values", "4,8,16", "--samples", "64"],
                       capsys)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 3
    e = [float(r["energy_per_bit_pj"]) for r in rows]
    assert e[0] < e[1] < e[2]


def test_sweep_batch(capsys):
    code, out, _ = run(["sweep", "--axis", "batch", "--values", "1,8"], capsys)
    rows = list(csv.reader(io.StringIO(out)))
    assert code == 0 and len(rows) >= 3


def test_sweep_empty_axis(capsys):
    code, out, _ = run(["sweep", "--axis", "d_max", "--values", ""], capsys)
    assert code == 0 and len(out.strip().splitlines()) == 1


def test_report_formats(tmp_path, capsys):
    (tmp_path / "m.json").write_text(json.dumps(ONE_LAYER))
    run(["simulate", "--model", str(tmp_path / "m.json"), "--out", str(tmp_path / "r")], capsys)
    for fmt in ("text", "json", "csv"):
        code, out, _ = run(["report", str(tmp_path / "r"), "--format", fmt], capsys)
        assert code == 0 and out
    assert run(["report", str(tmp_path / "nothing")], capsys)[0] != 0


def test_quantize(tmp_path, capsys):
    np.save(tmp_path / "x.npy", np.linspace(-1, 1, 9))
    code, _, _ = run(["quantize", str(tmp_path / "x.npy"), "--bits", "4", "--xmin", "-1",
                      "--xmax", "1", "--out", str(tmp_path / "q.json")], capsys)
    assert code == 0
    t = load_tensor(tmp_path / "q.json")
    assert t.codes[0] == 0 and t.codes[-1] == 15
    np.save(tmp_path / "y.npy", np.array([-1.0, 0.0, 1.0]))
    run(["quantize", str(tmp_path / "y.npy"), "--bits", "4", "--out", str(tmp_path / "s.json")],
        capsys)
    assert load_tensor(tmp_path / "s.json").codes.tolist() == [-7, 0, 7]


def test_bad_arguments(capsys):
    with pytest.raises(SystemExit):
        main(["sweep", "--axis", "colour"])

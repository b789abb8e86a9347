import csv
import json

import pytest

from germcanop.cli import ConfigError, dump_config, main, parse_config


def run(tmp_path, doc, *extra):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(doc))
    out = tmp_path / "out"
    code = main(["--config", str(cfg), "--out", str(out), *extra])
    summary = json.loads((out / "summary.json").read_text()) if (out / "summary.json").exists() else None
    return code, out, summary


def test_config_roundtrip():
    cfg = parse_config({"scenario": "quantize", "h": 0.02})
    assert cfg["h"] == 0.02 and cfg["energy_range"] == [0.0, 0.1]
    assert parse_config(json.loads(dump_config(cfg))) == cfg


def test_unknown_key_rejected():
    with pytest.raises(ConfigError):
        parse_config({"scenario": "quantize", "hbar": 0.01})
    with pytest.raises(ConfigError):
        parse_config({"scenario": "quantize", "tolerances": {"energy": -1}})


def test_exit_code_config_error(tmp_path):
    code, _, summary = run(tmp_path, {"scenario": "quantize", "bogus": 1})
    assert code == 2 and summary is None
    assert main(["--config", str(tmp_path / "missing.json")]) == 2


def test_transition_check_passes(tmp_path):
    code, out, summary = run(tmp_path, {"scenario": "transition-check"}, "--seed", "3", "--threads", "1")
    assert code == 0 and summary["status"] == "pass" and summary["seed"] == 3
    assert summary["exercises"]
    rows = list(csv.reader(open(out / "transition.csv")))
    assert rows[0][0] == "p" and len(rows) == 42


def test_gaussian_packet_outputs(tmp_path):
    doc = {"scenario": "gaussian-packet", "outputs": {"wavefunction": "psi.bin", "wavefunction_csv": "psi.csv"}}
    code, out, summary = run(tmp_path, doc)
    assert code == 0 and (out / "psi.bin").exists() and (out / "psi.csv").exists()


def test_exit_code_check_failure(tmp_path):
    code, _, summary = run(tmp_path, {"scenario": "gaussian-packet", "tolerances": {"profile": 1e-30}})
    assert code == 1 and summary["status"] == "fail"


def test_exit_code_numerical_error(tmp_path):
    doc = {"scenario": "residual-scan", "h_list": [1.5, 1.2], "transport": False}
    code, _, summary = run(tmp_path, doc)
    assert code == 3 and summary["status"] == "error"


def test_transform_check(tmp_path):
    code, _, summary = run(tmp_path, {"scenario": "transform-check"})
    assert code == 0 and summary["checks"][0]["value"] <= 1e-6


def test_residual_scan_columns(tmp_path):
    doc = {"scenario": "residual-scan", "h_list": [0.0625, 0.03125], "transport": False,
           "tolerances": {"min_slope": 0.0}}
    code, out, _ = run(tmp_path, doc)
    rows = list(csv.reader(open(out / "residual_scan.csv")))
    assert code == 0
    assert rows[0] == ["h", "E", "residual_norm", "relative_residual", "slope"] and len(rows) == 3

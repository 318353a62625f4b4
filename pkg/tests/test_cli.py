import csv
import os

import pytest
import yaml

from jcasnet.cli import (DEFAULTS, EXIT_CONFIG, ConfigError, build_alloc, build_analysis, load_config, main,
                         params_hash, tau_db_grid)


def _write(tmp_path, data, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(data))
    return str(p)


def test_defaults_build():
    cfg = load_config(None)
    a = build_alloc(cfg)
    assert a.T == 19 and a.N == 227
    assert build_analysis(cfg).N_w == 16
    assert tau_db_grid(cfg["analysis"]["tau_db"]).size == 121


def test_sweep_allocation_keeps_spans():
    cfg = load_config(None)
    a = build_alloc(cfg, r_max=450.0)
    assert a.T == 19 and a.N == 3168 // 2


@pytest.mark.parametrize("data,msg", [
    ({"network": {"r_c_m": 100.0}, "bogus": {}}, "unknown"),
    ({"network": {"alpha_X": 2.0}}, "unknown"),
    ({"analysis": {"N_w": 4}}, "missing"),
    ({"network": {"r_c_m": -5.0}}, "positive"),
    ({"network": "flat"}, "mapping"),
])
def test_config_errors(tmp_path, data, msg):
    with pytest.raises(ConfigError, match=msg):
        load_config(_write(tmp_path, data))


def test_malformed_yaml(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("network: [unclosed")
    with pytest.raises(ConfigError):
        load_config(str(p))


def test_exit_code_on_bad_config(tmp_path, capsys):
    assert main(["ccdf", "--config", _write(tmp_path, {"network": {"N_L": 0}})]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err
    assert main(["ccdf", "--trials", "0"]) == EXIT_CONFIG


def test_params_hash_tracks_inputs():
    cfg = load_config(None)
    h = params_hash(cfg)
    assert len(h) == 16 and h == params_hash(load_config(None))
    cfg["network"]["r_c_m"] = 90.0
    assert params_hash(cfg) != h


def _small_config(tmp_path):
    return _write(tmp_path, {
        "network": {"r_c_m": 100.0},
        "waveform": {"grid": [28, 140, 3, 14]},
        "analysis": {"outer_panels": 4, "outer_order": 8, "tau_db": {"lo": -10.0, "hi": 20.0, "step": 10.0}},
        "simulation": {"n_trials": 30, "tau_db": {"lo": -10.0, "hi": 20.0, "step": 10.0}},
    })


def test_ccdf_command_writes_csvs(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["ccdf", "--config", _small_config(tmp_path), "--out", str(out)]) == 0
    names = sorted(f for f in os.listdir(out) if f.endswith(".csv"))
    assert names == sorted(f"ccdf_{k}.csv" for k in ("AM", "GM", "HM", "rad", "typ", "com", "snr"))
    with open(out / "ccdf_AM.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert set(r["side"] for r in rows) == {"LB", "UB", "MC"}
    assert all(len(r["params_hash"]) == 16 for r in rows)
    assert (out / "plot_ccdf_AM.py").exists()

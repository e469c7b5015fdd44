import csv
import json
import time

import pytest

from mdiprts.cli import SCHEMA, main
from mdiprts.config import ConfigError, parse_config

BASE = {
    "device": {"y0": 1e-5, "eta_d": 0.45, "e_d": 0.02, "f_e": 1.16},
    "intensities": {"alice": {"s": 0.45, "p_s": 0.5, "mu": 0.3, "nu": 0.02}},
    "channels": {"alice": {"eta0": 0.01, "sigma": 0.9}, "bob": {"eta0": 0.01, "sigma": 0.9}},
    "grid": {"resolution": 64, "eta_min": 1e-4},
}


def _write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def _rows(path):
    lines = path.read_text().splitlines()
    assert lines[0] == SCHEMA
    return list(csv.DictReader(lines[1:]))


def test_rate_map_fast_and_reproducible(tmp_path):
    cfg = _write(tmp_path, BASE)
    start = time.perf_counter()
    assert main(["rate-map", "--config", cfg, "--out", str(tmp_path / "a"), "--quiet"]) == 0
    assert time.perf_counter() - start < 60
    assert main(["rate-map", "--config", cfg, "--out", str(tmp_path / "b"), "--quiet"]) == 0
    first = (tmp_path / "a" / "rate_map.csv").read_bytes()
    assert first == (tmp_path / "b" / "rate_map.csv").read_bytes()
    rows = _rows(tmp_path / "a" / "rate_map.csv")
    assert len(rows) == 64 * 64
    assert b"\r" not in first


def test_thresholds_command(tmp_path):
    cfg = _write(tmp_path, BASE)
    assert main(["thresholds", "--config", cfg, "--out", str(tmp_path), "--quiet"]) == 0
    (row,) = _rows(tmp_path / "thresholds.csv")
    assert float(row["eta_a_critical"]) == pytest.approx(float(row["eta_b_critical"]), rel=1e-2)
    assert len(_rows(tmp_path / "boundary.csv")) > 10


def test_sweep_command(tmp_path):
    cfg = dict(BASE, channels={"sweep": {"distances_km": [60, 20], "sigma_a": 0.9, "sigma_b": 0.9}},
               models=["simplified", "observable"], domain=["full", {"square": {"eta_at": 0.01, "eta_bt": 0.01}}])
    assert main(["sweep", "--config", _write(tmp_path, cfg), "--out", str(tmp_path), "--quiet"]) == 0
    rows = _rows(tmp_path / "sweep.csv")
    assert len(rows) == 2 * 2 * 2
    assert [float(r["distance_km"]) for r in rows[:4]] == [20.0] * 4
    assert float(rows[0]["loss_db"]) == pytest.approx(8.0)
    assert all(float(r["rate"]) >= 0 for r in rows)


def test_validate_reports_seed(tmp_path, capsys):
    cfg = dict(BASE, mc={"n": 20000, "seed": 77}, models=["observable"], domain=["full"])
    code = main(["validate", "--config", _write(tmp_path, cfg), "--out", str(tmp_path), "--quiet"])
    out = capsys.readouterr().out
    assert out.splitlines()[0] == "seed=77 n=20000"
    assert code in (0, 1)
    assert ("ALL PASS" in out) == (code == 0)
    assert (tmp_path / "validate.txt").read_text() == out


@pytest.mark.parametrize("patch", [
    {"extra": 1},
    {"grid": {"resolution": 32}},
    {"device": {"y0": 1e-5, "eta_d": 0.45, "e_d": 0.6, "f_e": 1.16}},
    {"domain": "circle"},
    {"observables": {"qx": [[1e-3] * 3] * 3, "tx": [[2e-3] * 3] * 3, "qz": 1e-3, "tz": 1e-4}},
])
def test_invalid_config_exits_2(tmp_path, patch, capsys):
    cfg = dict(BASE, **patch)
    assert main(["rate-map", "--config", _write(tmp_path, cfg), "--out", str(tmp_path)]) == 2
    assert "invalid config" in capsys.readouterr().err


def test_missing_config_and_sweep_section(tmp_path):
    assert main(["rate-map", "--config", str(tmp_path / "none.json"), "--out", str(tmp_path)]) == 2
    assert main(["sweep", "--config", _write(tmp_path, BASE), "--out", str(tmp_path), "--quiet"]) == 2


def test_parse_defaults():
    cfg = parse_config({k: BASE[k] for k in ("device", "intensities")})
    assert cfg.alice == cfg.bob
    assert cfg.resolution == 192
    assert cfg.models == ("simplified", "integration", "observable")
    with pytest.raises(ConfigError):
        parse_config({"device": BASE["device"]})

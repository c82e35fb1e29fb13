import csv
import json

import pytest

from ccatrack.cli import main
from ccatrack.sim import SimConfig


@pytest.fixture()
def cfg_path(tmp_path):
    path = tmp_path / "small.json"
    SimConfig(frames=1, gp_history=300, T=20).save(path)
    return path


def test_run_writes_tables(cfg_path, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg_path), "--seed", "1", "--runs", "2", "--out", str(out)]) == 0
    assert sorted(p.name for p in (out / "runs").iterdir()) == ["cca-predict_seed1.csv", "cca-predict_seed2.csv"]
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seeds"] == [1, 2] and manifest["config"]["T"] == 20
    assert "mean sum SE" in capsys.readouterr().out


def test_run_is_byte_identical(cfg_path, tmp_path):
    for name in ("a", "b"):
        assert main(["run", "--config", str(cfg_path), "--schemes", "cca-predict", "upa", "--out", str(tmp_path / name)]) == 0
    for rel in ("runs/cca-predict_seed0.csv", "runs/upa_seed0.csv", "summary.csv", "outage.csv"):
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()
    # manifests differ only in the output directory they echo
    ma, mb = (json.loads((tmp_path / n / "manifest.json").read_text()) for n in ("a", "b"))
    for m in (ma, mb):
        m["config"].pop("out_dir")
        for c in m["labels"].values():
            c.pop("out_dir")
    assert ma == mb


def test_sweep(cfg_path, tmp_path):
    out = tmp_path / "sw"
    assert main(["sweep", "--config", str(cfg_path), "--param", "power_w", "--values", "0.03", "0.06", "--out", str(out)]) == 0
    with open(out / "sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert {r["value"] for r in rows} == {"0.03", "0.06"}
    assert (out / "power_w=0.03" / "summary.csv").exists()


def test_codebook_commands(tmp_path, capsys):
    assert main(["codebook", "build", "--side", "t"]) == 0
    assert "max layer (16, 21)" in capsys.readouterr().out
    assert main(["codebook", "inspect", "--side", "t", "--alpha", "180", "--beta", "90"]) == 0
    doc = json.loads(capsys.readouterr().out.split("\n", 1)[1])
    assert doc["indices"][0] == 11
    path = tmp_path / "cb.json"
    assert main(["codebook", "export", "--side", "t", "--layers", "16,21", "--path", str(path)]) == 0
    assert json.loads(path.read_text())["layers"][0]["m_s"] == 16


def test_latency_command(capsys):
    assert main(["latency", "--rate", "1e9"]) == 0
    out = capsys.readouterr().out
    line = next(x for x in out.splitlines() if x.startswith("t_msi"))
    assert float(line.split()[1]) == pytest.approx(2.4)


def test_config_command(tmp_path, capsys):
    assert main(["config"]) == 0
    assert json.loads(capsys.readouterr().out)["M_r"] == 112
    bad = tmp_path / "bad.json"
    bad.write_text('{"K": 9}')
    assert main(["config", "--config", str(bad)]) == 1

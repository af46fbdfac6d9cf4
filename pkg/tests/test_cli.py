import json

import pytest

from heatlab import __version__
from heatlab.cli import CampaignConfig, main


def run(*argv):
    try:
        return main([str(a) for a in argv])
    except SystemExit as exc:
        return exc.code


@pytest.fixture
def line(tmp_path):
    path = tmp_path / "line.json"
    assert run("build", "lattice", "--dim", 1, "--radius", 12, "-o", path) == 0
    return path


def test_build_outputs(tmp_path, line):
    doc = json.loads(line.read_text())
    assert doc["meta"]["version"] == __version__
    assert len(doc["vertices"]) == 25
    at = tmp_path / "at.json"
    assert run("build", "anti-tree", "--gamma", 0.5, "--levels", 4, "-o", at) == 0
    custom = tmp_path / "custom.json"
    assert run("build", "custom", "--spec", at, "-o", custom) == 0
    assert json.loads(custom.read_text())["vertices"] == json.loads(at.read_text())["vertices"]


def test_build_rejects_bad_schema(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"vertices": [{"id": "a", "m": -1}], "edges": []}))
    assert run("build", "custom", "--spec", bad, "-o", tmp_path / "o.json") == 1


def test_kernel_and_metric_csv(tmp_path, line):
    out = tmp_path / "k.csv"
    assert run("kernel", line, "--t", 1.0, 2.0, "--x", "0", "--y", "0", "1", "-o", out) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# heatlab") and "seed=" in lines[0]
    assert len(lines) == 2 + 4
    again = tmp_path / "k2.csv"
    run("kernel", line, "--t", 1.0, 2.0, "--x", "0", "--y", "0", "1", "-o", again)
    assert again.read_bytes() == out.read_bytes()
    met = tmp_path / "m.csv"
    assert run("metric", line, "--kind", "path-degree", "--S", 1, "--x", "0", "--y", "3", "-o", met) == 0
    # Deg = 2 on Z, so each step contributes 1 / sqrt 2
    assert float(met.read_text().splitlines()[-1].split(",")[2]) == pytest.approx(3 / 2 ** 0.5)


def test_verify_pass_and_rerun_identical(tmp_path, line):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["verify", "universal", "--graph", line, "--tmin", 0.1, "--tmax", 10,
            "--per-decade", 5, "--x", "0"]
    assert run(*args, "--out-dir", a) == 0
    first = {ext: (a / f"universal.{ext}").read_bytes() for ext in ("json", "csv")}
    assert run(*args, "--out-dir", a) == 0
    for ext in ("json", "csv"):
        assert (a / f"universal.{ext}").read_bytes() == first[ext]
    # a different out-dir only changes the recorded output paths
    assert run(*args, "--out-dir", b) == 0
    assert (a / "universal.csv").read_bytes() == (b / "universal.csv").read_bytes()
    da, db = (json.loads((d / "universal.json").read_text()) for d in (a, b))
    da["config"].pop("outputs"), db["config"].pop("outputs")
    assert da == db
    doc = json.loads(first["json"])
    assert doc["passed"] and doc["version"] == __version__
    assert doc["config_hash"] == CampaignConfig.from_dict(doc["config"]).config_hash()


def test_config_replay(tmp_path, line):
    first = tmp_path / "first"
    run("verify", "universal", "--graph", line, "--t", 1.0, "--x", "0", "--out-dir", first)
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(json.loads((first / "universal.json").read_text())["config"]))
    second = tmp_path / "second"
    assert run("verify", "universal", "--config", cfg, "--out-dir", second) == 0
    assert (first / "universal.csv").read_bytes() == (second / "universal.csv").read_bytes()
    third = tmp_path / "third"
    assert run("verify", "universal", "--config", first / "universal.json", "--out-dir", third) == 0
    assert (first / "universal.csv").read_bytes() == (third / "universal.csv").read_bytes()
    cfg.write_text(json.dumps({"campaign": "universal", "bogus": 1}))
    assert run("verify", "universal", "--config", cfg, "--out-dir", second) == 1


def test_violation_exit_and_report(tmp_path, line):
    out = tmp_path / "o"
    assert run("verify", "g", "--graph", line, "--N", 1, "--psi", 1e-9, "--c-max", 1,
               "--t", 1.0, "--x", "0", "--out-dir", out) == 2
    assert run("report", out / "g.json") == 2
    assert run("verify", "universal", "--graph", line, "--t", 1.0, "--x", "0", "--out-dir", out) == 0
    assert run("report", out / "universal.json") == 0


def test_errors_exit_one(tmp_path, line, monkeypatch):
    assert run("nonsense") == 1
    assert run("verify", "universal") == 1
    assert run("kernel", tmp_path / "missing.json") == 1
    # the combinatorial metric is not intrinsic, so the universal bound does not apply
    assert run("verify", "universal", "--graph", line, "--metric", "combinatorial", "--t", 1.0,
               "--out-dir", tmp_path) == 1
    monkeypatch.setenv("HEATLAB_THREADS", "x")
    assert run("kernel", line, "--t", 1.0) == 1
    monkeypatch.setenv("HEATLAB_THREADS", "0")
    assert run("kernel", line, "--t", 1.0) == 1

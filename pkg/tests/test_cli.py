import csv
import json
import os

import yaml

from latticeweyl.cli import DEFAULTS, load_config, main


def write_cfg(tmp_path, name, data):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(data))
    return str(p)


def test_defaults_materialised(tmp_path):
    cfg = load_config("weyl", write_cfg(tmp_path, "c.yaml", {"eps": [0.1]}))
    assert cfg["eps"] == [0.1]
    assert cfg["torus_m"] == DEFAULTS["torus_m"]
    assert cfg["lattice"]["halfwidth"] == 3.0


def test_unknown_key_rejected(tmp_path):
    path = write_cfg(tmp_path, "bad.yaml", {"bogus": 1})
    rc = main(["weyl", "-c", path])
    assert rc == 2


def test_malformed_yaml_exit_2(tmp_path):
    p = tmp_path / "broken.yaml"
    p.write_text("eps: [0.1\n")
    assert main(["weyl", "-c", str(p)]) == 2


def test_hypothesis_failure_exit_3(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    path = write_cfg(tmp_path, "np.yaml", {
        "symbol": {"name": "xi_only", "params": {"expr": "k0"}},
        "output": {"dir": ".", "prefix": "x"}})
    assert main(["certify", "-c", path]) == 3


def test_certify_and_weyl_run(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    path = write_cfg(tmp_path, "ok.yaml", {
        "eps": [0.1, 0.05],
        "quadrature": {"mc_samples": 100000},
        "output": {"dir": ".", "prefix": "t"}})
    assert main(["weyl", "-c", path]) == 0
    with open("t_weyl.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["eps", "count", "scaled_count", "volume", "remainder",
                       "boundary_gap", "jittered", "sandwich_low",
                       "sandwich_high", "sandwich_ok"]
    assert len(rows) == 3
    side = json.load(open("t_weyl.json"))
    assert side["schema_version"] == 1
    assert side["certificate"]["overall"] is True
    # config echo completeness: defaults appear in the sidecar
    assert side["config"]["torus_m"] == 64
    assert side["config"]["seed"] == 1234


def test_byte_identical_reruns(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    path = write_cfg(tmp_path, "d.yaml", {
        "eps": [0.1],
        "quadrature": {"mc_samples": 50000},
        "output": {"dir": ".", "prefix": "d"}})
    assert main(["weyl", "-c", path]) == 0
    first = (open("d_weyl.csv", "rb").read(), open("d_weyl.json", "rb").read())
    assert main(["weyl", "-c", path]) == 0
    second = (open("d_weyl.csv", "rb").read(), open("d_weyl.json", "rb").read())
    assert first == second


def test_poisson_subcommand(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    path = write_cfg(tmp_path, "p.yaml", {"eps": [0.1, 0.05],
                                          "output": {"dir": ".", "prefix": "p"}})
    assert main(["poisson", "-c", path]) == 0
    side = json.load(open("p_poisson.json"))
    assert side["summary"]["all_within_bound"] is True


def test_trace_check_subcommand(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    path = write_cfg(tmp_path, "tc.yaml", {"eps": [0.1],
                                           "output": {"dir": ".", "prefix": "tc"}})
    assert main(["trace-check", "-c", path]) == 0
    with open("tc_trace_check.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 5
    for row in rows:
        assert float(row["abs_err"]) < 1e-10


def test_defaults_only_run(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(["certify"]) == 0
    assert os.path.exists("run_certify.csv")

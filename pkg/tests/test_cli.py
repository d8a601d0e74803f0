import json
import math
import subprocess
import sys

import pytest

from monomer_dimer import __version__
from monomer_dimer import cli
from monomer_dimer import meanfield as mf
from monomer_dimer.reference import compute_reference


@pytest.fixture
def k3(tmp_path):
    p = tmp_path / "k3.txt"
    p.write_text("3\n0 1\n1 2\n0 2\n")
    return p


def run_json(argv, capsys):
    assert cli.run(argv) == 0
    return json.loads(capsys.readouterr().out)


def test_exact_json(k3, capsys):
    doc = run_json(["exact", "--graph", str(k3)], capsys)
    assert math.exp(doc["result"]["log_z"]) == pytest.approx(4.0)
    assert doc["result"]["log_z_enum"] == pytest.approx(doc["result"]["log_z_gaussian"])
    assert doc["version"] == __version__ and doc["seed"] == 0
    assert doc["config_hash"] == cli.config_hash(doc["config"])


def test_exact_requires_graph(capsys):
    assert cli.run(["exact"]) == 2
    assert "missing required parameter --graph" in capsys.readouterr().err


def test_unknown_flag_is_config_error(capsys):
    assert cli.run(["meanfield", "analyze", "--hh", "1"]) == 2
    assert capsys.readouterr().err.startswith("error:")


def test_config_precedence(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"seed": 11, "meanfield": {"analyze": {"h": 0.5, "J": 0.25}}}))
    doc = run_json(["meanfield", "analyze", "--config", str(cfg), "--J", "0.0"], capsys)
    assert doc["config"]["h"] == 0.5 and doc["config"]["J"] == 0.0 and doc["seed"] == 11


@pytest.mark.parametrize(
    "doc",
    [{"sede": 1}, {"meanfield": {"analyse": {}}}, {"meanfield": {"analyze": {"k": 1}}}, {"exact": 3}],
)
def test_config_unknown_keys_rejected(tmp_path, doc):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(doc))
    with pytest.raises(cli.ConfigError, match="unknown config key|must be an object"):
        cli.resolve(["meanfield", "analyze", "--config", str(cfg)])


def test_strict_determinism_forces_one_thread():
    _, cfg = cli.resolve(["gaussian", "--graph", "g", "--threads", "4", "--strict-determinism"])
    assert cfg["threads"] == 1
    with pytest.raises(cli.ConfigError):
        cli.resolve(["gaussian", "--graph", "g", "--threads", "0"])


def test_csv_header_and_float_repr(capsys):
    assert cli.run(["fluct", "pmf", "--N", "6", "--h", "0.1"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("# config_hash: ") and lines[1] == "# seed: 0"
    assert lines[2] == f"# version: {__version__}"
    assert lines[4] == "M,density,prob"
    probs = [float(l.split(",")[2]) for l in lines[5:]]
    assert len(probs) == 4 and math.fsum(probs) == pytest.approx(1.0)


def test_meanfield_critical_writes_reference(tmp_path, capsys):
    out = tmp_path / "ref.json"
    assert cli.run(["meanfield", "critical", "--out", str(out)]) == 0
    assert capsys.readouterr().out == ""
    assert out.read_text() == compute_reference().to_json()


def test_fluct_critical_missing_reference(tmp_path, capsys):
    missing = tmp_path / "nope.json"
    assert cli.run(["fluct", "critical", "--Ns", "1e3", "--ref", str(missing)]) == 2
    assert "meanfield critical --out" in capsys.readouterr().err


def test_fluct_critical_with_reference(tmp_path, capsys):
    ref = tmp_path / "ref.json"
    compute_reference().write(ref)
    assert cli.run(["fluct", "critical", "--Ns", "1000,10000", "--ref", str(ref), "--format", "csv"]) == 0
    rows = [l for l in capsys.readouterr().out.splitlines() if not l.startswith("#")]
    assert rows[0] == "N,quartic_distance,gaussian_distance" and len(rows) == 3


def test_numeric_error_exit_code(capsys):
    # no CLT on the coexistence curve
    h = mf.coexistence_h(3.0)
    assert cli.run(["fluct", "clt", "--N", "100", "--h", repr(h), "--J", "3.0"]) == 1
    assert "error:" in capsys.readouterr().err


def test_rf_solve_degenerate(capsys):
    doc = run_json(["rf", "solve"], capsys)
    assert doc["result"]["xi_star"] == pytest.approx((math.sqrt(5) - 1) / 2, abs=1e-12)


def test_zeros_single_and_corpus(tmp_path, k3, capsys):
    doc = run_json(["zeros", "--graph", str(k3)], capsys)
    assert doc["result"]["imaginary"] and doc["result"]["interlacing_weak"]
    (tmp_path / "p3.txt").write_text("3\n0 1\n1 2\n")
    assert cli.run(["zeros", "--graph", str(tmp_path), "--format", "csv"]) == 0
    body = [l for l in capsys.readouterr().out.splitlines() if not l.startswith("#")]
    assert body[0].startswith("graph,n,") and len(body) == 3


def test_gaussian_reproducible_across_threads(k3, capsys):
    a = run_json(["gaussian", "--graph", str(k3), "--samples", "20000", "--seed", "3"], capsys)
    b = run_json(["gaussian", "--graph", str(k3), "--samples", "20000", "--seed", "3", "--threads", "2"], capsys)
    assert a["result"] == b["result"]


def test_out_file_same_bytes_as_stdout(tmp_path, capsys):
    argv = ["er", "density", "--K", "2000", "--r", "3", "--seed", "5"]
    assert cli.run(argv) == 0
    text = capsys.readouterr().out
    out = tmp_path / "d.csv"
    assert cli.run(argv + ["--out", str(out)]) == 0
    assert out.read_text() == text


def test_module_entry_point(k3):
    r = subprocess.run([sys.executable, "-m", "monomer_dimer", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.strip() == __version__

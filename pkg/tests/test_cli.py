from __future__ import annotations

import json
import subprocess
import sys

import numpy as np

from dcaplm.cli import main


def _cfg(tmp_path, body):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(body))
    return str(p)


def test_fit_success_and_outputs(tmp_path):
    cfg = _cfg(tmp_path, {"simulation": {"N": 1024, "s": 8}, "B": 200})
    out = tmp_path / "out"
    assert main(["fit", "--config", cfg, "--seed", "5", "--threads", "2", "--out", str(out)]) == 0
    for name in ("fits.csv", "gbar_grid.csv", "tests.json", "manifest.json"):
        assert (out / name).exists()
    assert json.loads((out / "manifest.json").read_text())["seed"] == 5


def test_test_subcommand(tmp_path):
    cfg = _cfg(tmp_path, {"simulation": {"N": 512, "s": 4}, "B": 100})
    assert main(["fit", "--config", cfg, "--out", str(tmp_path / "f")]) == 0
    assert main(["test", "--config", cfg, "--model", str(tmp_path / "f" / "model.json"),
                 "--out", str(tmp_path / "t")]) == 0
    assert (tmp_path / "t" / "tests.json").exists()


def test_simulate_subcommand(tmp_path):
    cfg = _cfg(tmp_path, {"experiment": {"grid": [{"N": 512, "s": 4}], "replications": 2}})
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "s")]) == 0
    assert (tmp_path / "s" / "report.csv").exists()


def test_config_error_exit_code(tmp_path, capsys):
    assert main(["fit", "--config", _cfg(tmp_path, {"simulation": {}, "alpha": 1.5})]) == 2
    assert "alpha" in capsys.readouterr().err
    assert main(["fit", "--config", str(tmp_path / "nope.json")]) == 2


def test_data_error_exit_code(tmp_path):
    data = tmp_path / "d.csv"
    data.write_text("g,y,x\na,1,2\n")
    cfg = _cfg(tmp_path, {"input": str(data), "response": "y", "linear": ["x"], "spline": ["z"],
                          "group": "g", "out": str(tmp_path / "o")})
    assert main(["fit", "--config", cfg]) == 3


def test_numerical_error_exit_code(tmp_path):
    gen = np.random.default_rng(0)
    z = gen.uniform(0, 1, 200)
    rows = "\n".join(f"a,{gen.standard_normal()},{2 * v},{v}" for v in z)
    data = tmp_path / "d.csv"
    # x is an exact linear function of z, which the spline block already spans
    data.write_text("g,y,x,z\n" + rows + "\n")
    cfg = _cfg(tmp_path, {"input": str(data), "response": "y", "linear": ["x"], "spline": ["z"],
                          "group": "g", "intercept": True, "out": str(tmp_path / "o")})
    assert main(["fit", "--config", cfg]) == 4


def test_usage_error_exit_code():
    proc = subprocess.run([sys.executable, "-m", "dcaplm", "fit"], capture_output=True)
    assert proc.returncode == 2


def test_module_entry_point(tmp_path):
    cfg = _cfg(tmp_path, {"simulation": {"N": 512, "s": 4}, "B": 100, "out": str(tmp_path / "o")})
    proc = subprocess.run([sys.executable, "-m", "dcaplm", "fit", "--config", cfg], capture_output=True)
    assert proc.returncode == 0, proc.stderr

import io
import json
import random
import subprocess
import sys

import pytest

from medianosc import cli, examples
from medianosc.cli import run
from medianosc.core import dump_step_function, random_step_function


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture
def func_file(tmp_path):
    path = tmp_path / "f.json"
    path.write_text(dump_step_function(random_step_function(random.Random(3), 1, 4)))
    return str(path)


def test_median_json(func_file):
    code, out, _ = call("median", "--function", func_file, "--omega", "1/2")
    data = json.loads(out)
    assert code == 0 and data["schema"] == 1
    assert data["d"] == "13/4" and data["omega"] == "7/8"


def test_median_csv_has_header(func_file):
    code, out, _ = call("median", "--function", func_file, "--cube", "1/8,1/2", "--format", "csv")
    lines = out.splitlines()
    assert code == 0 and lines[0] == "x0,side,s,t,M_s,M_t,d" and len(lines) == 2


def test_sparse_general(func_file):
    code, out, _ = call("sparse", "--function", func_file, "--general", "--s", "3/10", "--t", "9/20")
    data = json.loads(out)
    assert code == 0 and data["holds"] and data["general"]["holds"]


def test_porosity_integer_set():
    code, out, _ = call("porosity", "--set", "lattice", "--family", "dyadic:0,2:2", "--depth", "6")
    data = json.loads(out)
    assert code == 0 and data["median_porous"]
    assert data["rows"][0]["V_s"] == "1/4"


def test_porosity_point_file_csv(tmp_path):
    pts = tmp_path / "pts.txt"
    pts.write_text("0 0\n1/2 1/2\n")
    code, out, _ = call("porosity", "--points", str(pts), "--family", "dyadic:0,0,1:1", "--depth", "3", "--format", "csv")
    assert code == 0
    assert out.splitlines()[0].startswith("x0,x1,side,meets")


def test_weights_exact_and_divergent():
    code, out, _ = call("weights", "--set", "single", "--family", "centered:0:-2..2", "--alpha", "1/2", "--p", "2")
    assert code == 0 and json.loads(out)["value"] == "4/3"
    code, out, _ = call("weights", "--set", "single", "--family", "centered:0:0..1", "--alpha", "2")
    data = json.loads(out)
    assert code == 0 and data["divergent"] and data["value"] is None


def test_mu_and_counterexample():
    code, out, _ = call("mu", "--set", "single", "--p", "inf")
    assert code == 0 and abs(json.loads(out)["lower"] - 1) < 0.1
    code, out, _ = call("counterexample", "--K", "3")
    data = json.loads(out)
    assert code == 0 and data["seminorm"] == "0"
    assert [r["d"] for r in data["pair_differences"]] == ["2", "4", "6", "8"]


def test_gamma_scan_plot_data():
    code, out, _ = call("gamma", "--demo", "scan", "--count", "5", "--plot-data")
    assert code == 0
    assert out.splitlines()[0] == "n0,n1,left,right,scale,predicted,ratio"
    assert len(out.splitlines()) == 6


@pytest.mark.parametrize(
    "argv",
    [
        ("median", "--function", "/nonexistent.json"),
        ("porosity", "--set", "bogus", "--family", "dyadic:0,1:1"),
        ("weights", "--set", "single", "--family", "centered:0:0..1", "--alpha", "0.5x"),
        ("median",),
        ("nosuchcommand",),
        ("--jobs", "0", "selftest"),
    ],
)
def test_invalid_input_exits_one(argv):
    code, out, err = call(*argv)
    assert code == 1 and out == ""
    assert err.count("\n") == 1 and err.startswith("error: ")


def test_violated_invariant_exits_two(monkeypatch):
    real = examples.counterexample_checks

    def broken(K, narrow, wide):
        rep = real(K, narrow, wide)
        rep.seminorm = 1
        return rep

    monkeypatch.setattr(examples, "counterexample_checks", broken)
    code, out, err = call("counterexample", "--K", "3")
    assert code == 2 and out == ""
    assert err.startswith("invariant: dyadic median differences vanish")


def test_internal_error_exits_two(monkeypatch):
    def boom(args, out):
        raise RuntimeError("unexpected")

    monkeypatch.setitem(cli.COMMANDS, "selftest", boom)
    code, _, err = call("selftest")
    assert code == 2 and err == "internal: RuntimeError: unexpected\n"


def test_module_entry_point_selftest():
    proc = subprocess.run([sys.executable, "-m", "medianosc", "selftest", "--seed", "3"], capture_output=True, text=True)
    assert proc.returncode == 0
    data = json.loads(proc.stdout)
    assert data["ok"] and {c["name"] for c in data["checks"]} >= {"median order properties", "sparse decompositions"}

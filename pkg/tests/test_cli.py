import csv
import io
import json

import numpy as np
import pytest

from qbound.cli import run

SUBCOMMANDS = ("gibbs", "fhat", "bound", "verify", "tightness")


def g(x):
    return (x + 1) * np.log(x + 1) - x * np.log(x)


@pytest.fixture
def osc_file(tmp_path):
    p = tmp_path / "osc1.json"
    p.write_text(json.dumps({"oscillator": {"modes": 1, "frequencies": [1]}}))
    return str(p)


def call(argv):
    out = io.StringIO()
    code = run(argv, stdout=out)
    return code, out.getvalue()


def test_gibbs_example(osc_file):
    code, out = call(["gibbs", "--spectrum", osc_file, "--energy", "1.5"])
    assert code == 0
    assert out.strip() == '{"lambda":0.693147181,"entropy":1.386294361}'


def test_bound_example():
    code, out = call(["bound", "--char", "mi", "--variant", "finite", "--n", "2", "--dims", "2,2", "--eps", "0.5"])
    assert code == 0
    data = json.loads(out)
    assert abs(data["rhs"] - (0.5 * np.log(4) + 2 * g(0.5))) < 1e-9
    assert out.startswith('{"rhs":2.602689685,')
    assert data["t"] is None


def test_bound_reports_t(osc_file):
    code, out = call(["bound", "--char", "mi", "--variant", "oscillator", "--n", "2", "--eps", "0.1",
                      "--energy", "2", "--spectrum", osc_file, "--opt-t"])
    assert code == 0
    opt = json.loads(out)
    code, out = call(["bound", "--char", "mi", "--variant", "oscillator", "--n", "2", "--eps", "0.1",
                      "--energy", "2", "--spectrum", osc_file, "--t", "1"])
    fixed = json.loads(out)
    assert fixed["t"] == 1.0
    assert 0 < opt["t"] < 10 and opt["rhs"] <= fixed["rhs"]


def test_fhat_lists(osc_file):
    code, out = call(["fhat", "--spectrum", osc_file, "--energy", "1,2"])
    data = json.loads(out)
    assert code == 0
    assert len(data["f_bar"]) == 2
    assert abs(data["f_bar"][0] - 2 * np.log(2)) < 1e-8
    assert all(a <= b for a, b in zip(data["f_bar"], data["f_bar_osc"]))


def test_verify_example(tmp_path):
    out_csv = tmp_path / "run.csv"
    argv = ["verify", "--char", "mi", "--variant", "finite", "--n", "2", "--dims", "2,2", "--eps", "0.1",
            "--samples", "1000", "--seed", "42", "--out", str(out_csv)]
    code, out = call(argv)
    assert code == 0
    rows = list(csv.reader(out_csv.open()))
    assert len(rows) == 1001
    assert json.loads(out)["failures"] == 0
    first = out_csv.read_bytes()
    call(argv + ["--threads", "3"])
    assert out_csv.read_bytes() == first


def test_verify_writes_only_out(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    code, _ = call(["verify", "--char", "mi", "--n", "2", "--dims", "2,2", "--eps", "0.1", "--samples", "5",
                    "--out", "only.csv"])
    assert code == 0
    assert sorted(p.name for p in tmp_path.iterdir()) == ["only.csv"]


def test_verify_inequality_suite(tmp_path):
    code, out = call(["verify", "--char", "cmi_ub", "--n", "3", "--dims", "2,2,2", "--eps", "0",
                      "--samples", "20", "--out", str(tmp_path / "i.csv")])
    assert code == 0 and json.loads(out)["records"] == 20


def test_tightness_csv(tmp_path):
    path = tmp_path / "t.csv"
    code, out = call(["tightness", "--axis", "dimension", "--grid", "2,4,8", "--eps", "1", "--out", str(path)])
    assert code == 0
    rows = list(csv.DictReader(path.open()))
    assert [float(r["value"]) for r in rows] == [2.0, 4.0, 8.0]
    expected = 2 * np.log(8) / (2 * np.log(8) + 2 * g(1.0))
    assert abs(float(rows[-1]["ratio"]) - expected) < 1e-12


def test_negative_slack_exits_one(monkeypatch, tmp_path):
    import qbound.witness as W

    original = W.VerifyRecord.slack
    monkeypatch.setattr(W.VerifyRecord, "slack", property(lambda self: -1.0))
    code, _ = call(["verify", "--char", "mi", "--n", "2", "--dims", "2,2", "--eps", "0.1", "--samples", "3",
                    "--out", str(tmp_path / "x.csv")])
    monkeypatch.setattr(W.VerifyRecord, "slack", original)
    assert code == 1


@pytest.mark.parametrize("argv", [
    ["gibbs", "--spectrum", "/nonexistent.json", "--energy", "1"],
    ["bound", "--char", "mi", "--n", "2", "--eps", "0.1"],
    ["bound", "--char", "mi", "--n", "2", "--dims", "2,2", "--eps", "2"],
    ["verify", "--char", "mi", "--n", "2", "--dims", "2,2,2", "--eps", "0.1"],
    ["frobnicate"],
    ["bound", "--char", "mi"],
])
def test_usage_errors_exit_two(argv, capsys):
    code, _ = call(argv)
    assert code == 2


def test_bad_spectrum_or_energy_exits_two(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert call(["gibbs", "--spectrum", str(bad), "--energy", "1"])[0] == 2
    bad.write_text(json.dumps({"eigenvalues": [0, 1]}))
    assert call(["gibbs", "--spectrum", str(bad), "--energy", "5"])[0] == 2




@pytest.mark.parametrize("cmd", SUBCOMMANDS)
def test_help_for_every_subcommand(cmd, capsys):
    assert run([cmd, "--help"]) == 0
    assert "usage: qbound " + cmd in capsys.readouterr().out

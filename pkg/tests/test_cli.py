import json
import subprocess
import sys

import numpy as np
import pytest

from besovns.cli import emit_report, parse_config, run
from besovns.io import write_field
from besovns.samples import random_band_field

FAST = ["--N", "16", "--rings", "2", "3", "--S", "4"]


def lines(path):
    return [json.loads(x) for x in path.read_text().splitlines()]


@pytest.fixture
def datum(tmp_path, rng):
    path = tmp_path / "f.bnf1"
    write_field(path, random_band_field(2, 32, rng, 5))
    return path


def test_selftest_exit_zero():
    proc = subprocess.run([sys.executable, "-m", "besovns", "selftest"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    rows = [json.loads(x) for x in proc.stdout.splitlines()]
    assert rows[0]["record"] == "manifest"
    assert all(r["passed"] for r in rows[1:])


def test_norm_json(tmp_path, datum):
    out = tmp_path / "norm.json"
    assert run(["norm", "--in", str(datum), "--p", "2", "--q", "2", "--out", str(out)]) == 0
    rec = json.loads(out.read_text())
    assert np.isfinite(rec["besov"]) and rec["besov"] > 0
    assert {"besov_lorentz", "tll", "microlocal", "per_band", "manifest"} <= set(rec)
    assert rec["manifest"]["inputs"] == [str(datum)]


def test_missing_input_exit_one(tmp_path, capsys):
    missing = tmp_path / "nope.bnf1"
    assert run(["norm", "--in", str(missing)]) == 1
    assert str(missing) in capsys.readouterr().err


def test_unknown_flag_exit_one(capsys):
    assert run(["norm", "--in", "x", "--bogus", "1"]) == 1
    assert "usage" in capsys.readouterr().err
    assert run(["frobnicate"]) == 1


def test_config_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# fast run\nN = 16\nrings = 2 3\nS = 4\ntol = 1e-8\namplitude = 0.5  # scaled\n")
    parsed = parse_config(cfg)
    assert parsed["N"] == 16 and parsed["rings"] == (2, 3)
    out = tmp_path / "a"
    assert run(["solve", "--config", str(cfg), "--out", str(out), "--amplitude", "0.25"]) == 0
    man = lines(out / "iterations.jsonl")[0]
    assert man["config"]["amplitude"] == 0.25  # flag beats config
    assert man["config"]["N"] == 16  # config beats default
    assert man["config"]["max_iter"] == 30  # default
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = blue\n")
    assert run(["solve", "--config", str(bad), "--out", str(tmp_path / "b")]) == 1


def test_solve_outputs(tmp_path):
    out = tmp_path / "s"
    assert run(["solve", *FAST, "--tol", "1e-8", "--out", str(out)]) == 0
    recs = lines(out / "iterations.jsonl")
    assert recs[0]["record"] == "manifest" and recs[-1]["record"] == "summary"
    iters = [r for r in recs if r["record"] == "iterate"]
    assert len(iters) == recs[-1]["iterations"] + 1
    assert (out / "solution.json").is_file() and (out / "timing.json").is_file()


def test_solve_non_convergence_exit_two(tmp_path):
    args = ["solve", *FAST, "--datum", "random", "--amplitude", "2000", "--out", str(tmp_path / "x")]
    assert run(args) == 2


def test_emit_report_empty(tmp_path):
    emit_report([], tmp_path / "e.jsonl", tmp_path / "e.csv", ["a", "b"])
    assert (tmp_path / "e.jsonl").read_text() == ""
    assert (tmp_path / "e.csv").read_text() == "a,b\n"


def test_emit_report_unwritable(tmp_path):
    from besovns.cli import UsageError

    with pytest.raises(UsageError):
        emit_report([{"a": 1}], tmp_path / "no" / "dir" / "x.jsonl")


def test_determinism_and_oracle_csv(tmp_path):
    outs = []
    for name in ("r1", "r2"):
        out = tmp_path / name
        code = run(["oracle-compare", *FAST, "--datum", "random", "--seed", "7", "--tol", "1e-8", "--out", str(out)])
        assert code == 0
        outs.append(out)
    for fname in ("oracle.csv", "oracle.jsonl", "oracle_rows.jsonl"):
        a = (outs[0] / fname).read_bytes().replace(str(outs[0]).encode(), b"OUT")
        b = (outs[1] / fname).read_bytes().replace(str(outs[1]).encode(), b"OUT")
        assert a == b
    csv_lines = (outs[0] / "oracle.csv").read_text().splitlines()
    assert csv_lines[0].startswith("# {")
    assert csv_lines[1] == "t,ring,picard_l2,rk4_l2,rel_diff"
    assert max(float(r.split(",")[4]) for r in csv_lines[2:]) < 1e-3


def test_heatflow_and_flow(tmp_path, datum):
    hf = tmp_path / "hf"
    assert run(["heatflow", "--in", str(datum), *["--rings", "2", "3", "--S", "2"], "--out", str(hf)]) == 0
    rec = json.loads((hf / "heatflow.json").read_text())
    assert rec["microlocal"] > 0 and rec["decay"][0]["passed"]
    manifest = hf / "heat.json"
    t = json.loads(manifest.read_text())["times"][-1]
    fl = tmp_path / "fl"
    args = ["flow", "--u", str(manifest), "--v", str(manifest), "--kind", "couple", "--t", repr(t), "--out", str(fl)]
    assert run(args) == 0
    rec = json.loads((fl / "flow.json").read_text())
    assert rec["ratio"] is not None and rec["quadrature_residual"] < 0.1
    assert (fl / "flow.bnf1").is_file()
    assert run(args[:-4] + ["--t", "0.5", "--out", str(fl)]) == 1

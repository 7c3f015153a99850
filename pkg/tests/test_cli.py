import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from tstfnbp import cli
from tstfnbp.montecarlo import run_streams, split_counts
from tstfnbp.samplers import RngStream


def run(tmp_path, *args, name="out"):
    out = tmp_path / name
    code = cli.main([*args, "--out", str(out)])
    return code, out


def read_csv(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# manifest=manifest.json run_id=")
    return list(csv.reader(lines[1:]))


def test_simulate_reproducible_per_seed_and_workers(tmp_path):
    args = ["simulate", "--samples", "300", "--grid", "0.5,1,2", "--seed", "7", "--workers", "3"]
    c1, o1 = run(tmp_path, *args, name="a")
    c2, o2 = run(tmp_path, *args, name="b")
    assert c1 == c2 == 0
    assert (o1 / "simulate.csv").read_text() == (o2 / "simulate.csv").read_text()
    rows = read_csv(o1 / "simulate.csv")
    assert rows[0] == ["path_id", "time", "M_value", "Q_count"]
    assert len(rows) == 1 + 300 * 3
    manifest = json.loads((o1 / "manifest.json").read_text())
    assert manifest["config"]["seed"] == 7 and manifest["config"]["workers"] == 3
    assert manifest["command"] == "simulate"


def test_seed_environment_is_overridden_by_flag(monkeypatch):
    monkeypatch.setenv("TSTFNBP_SEED", "11")
    _, cfg = cli.parse_config(["simulate"])
    assert cfg.seed == 11
    _, cfg = cli.parse_config(["simulate", "--seed", "5"])
    assert cfg.seed == 5


def test_config_file_layering(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"params": {"alpha": 0.3, "lambda": 0.2}, "samples": 50, "seed": 3}))
    _, cfg = cli.parse_config(["moments", "--config", str(path), "--seed", "9"], env={})
    assert cfg.params.alpha == 0.3 and cfg.params.lam == 0.2
    assert cfg.n_samples == 50 and cfg.seed == 9


@pytest.mark.parametrize("body,needle", [
    ('{"alpha": 0.5,}', "c.json:1:"),
    ('{"colour": 1}', "unknown key"),
    ('{"params": {"gamma": 1}}', "unknown parameter key"),
    ('[1, 2]', "JSON object"),
])
def test_bad_config_files(tmp_path, capsys, body, needle):
    path = tmp_path / "c.json"
    path.write_text(body)
    assert cli.main(["moments", "--config", str(path), "--out", str(tmp_path / "o")]) == 2
    assert needle in capsys.readouterr().err


@pytest.mark.parametrize("args,needle", [
    (["simulate", "--grid", "1,0.5"], "strictly increasing"),
    (["simulate", "--alpha", "1.5"], "alpha"),
    (["pmf", "--lambda1", "0.5", "--mu", "1"], "lambda1 > mu**alpha"),
    (["levy"], "beta = 1"),
    (["simulate", "--workers", "0"], "workers"),
    (["simulate", "--grid", "a,b"], "--grid"),
])
def test_config_errors_exit_two(tmp_path, capsys, args, needle):
    code, _ = run(tmp_path, *args)
    assert code == 2
    assert needle in capsys.readouterr().err


def test_numerical_failure_exit_three(tmp_path, capsys):
    # first passage uses the moment series, which diverges at the default lam
    code, _ = run(tmp_path, "fpt", "--grid", "1")
    assert code == 3
    assert "convergence region" in capsys.readouterr().err


def test_pmf_csv_and_json(tmp_path):
    code, out = run(tmp_path, "pmf", "--lambda", "0.3", "--n-max", "4", "--grid", "1,2")
    assert code == 0
    rows = read_csv(out / "pmf.csv")
    assert rows[0] == ["time", "n", "probability"]
    probs = np.array([float(r[2]) for r in rows[1:6]])
    assert np.all(probs > 0) and probs.sum() < 1
    code, out = run(tmp_path, "pmf", "--lambda", "0.3", "--n-max", "2", "--format", "json", name="j")
    body = json.loads((out / "pmf.json").read_text())
    assert body["columns"] == ["time", "n", "probability"] and len(body["rows"]) == 3
    assert json.loads((out / "manifest.json").read_text())["results"]["method"] == "series"


def test_moments_levy_and_lrd(tmp_path):
    code, out = run(tmp_path, "moments", "--grid", "1,2", "--q", "0.3")
    assert code == 0
    rows = read_csv(out / "moments.csv")
    assert rows[0][-1] == "E_M_0.3" and len(rows) == 3
    code, out = run(tmp_path, "levy", "--beta", "1", "--k", "3", "--lambda1", "1.5", "--mu", "1", name="l")
    assert code == 0 and len(read_csv(out / "levy.csv")) == 4
    code, out = run(tmp_path, "lrd", "--samples", "2000", "--grid", "10,100,1000", name="r")
    assert code == 0
    extra = json.loads((out / "manifest.json").read_text())["results"]
    assert extra["slope"] < 0 and isinstance(extra["noisy"], bool)


def test_verify_subset(tmp_path):
    code, out = run(tmp_path, "verify", "--checks", "3,4")
    assert code == 0
    report = json.loads((out / "verify.json").read_text())
    assert report["passed"] and [c["number"] for c in report["checks"]] == [3, 4]


def test_console_script_help():
    res = subprocess.run([sys.executable, "-m", "tstfnbp.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "verify" in res.stdout


def test_split_counts_and_stream_order():
    assert split_counts(10, 3) == [4, 3, 3]
    assert split_counts(2, 5) == [1, 1]
    with pytest.raises(ValueError):
        split_counts(0, 1)
    task = lambda s, n: s.generator.random(n)
    a = run_streams(task, 100, 5, 4)
    b = run_streams(task, 100, 5, 4)
    assert np.array_equal(a, b) and a.shape == (100,)
    assert np.array_equal(a[:25], RngStream(5, 0).generator.random(25))

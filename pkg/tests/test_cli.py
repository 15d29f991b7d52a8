import json
import subprocess
import sys

import pytest

from dpmestim.cli import main


def run(capsys, *argv):
    assert main(list(argv)) == 0
    return capsys.readouterr().out


def as_json(capsys, *argv):
    return json.loads(run(capsys, *argv))


def test_fit(capsys):
    out = as_json(capsys, "fit", "--n", "500", "--d", "3", "--lambda-reg", "0.1")
    assert len(out["theta"]) == 3 and out["grad_norm"] <= 1e-9


@pytest.mark.parametrize("which", ["min", "min-generic", "max"])
def test_release_lambda(capsys, which):
    out = as_json(capsys, "release-lambda", "--which", which, "--n", "2000", "--d", "3", "--delta", "0.05")
    assert out["lambda_hat"] >= 0


@pytest.mark.parametrize("method", ["qsc", "generic"])
def test_release_theta(capsys, method):
    out = as_json(capsys, "release-theta", "--method", method, "--n", "20000", "--d", "3")
    assert out["ledger_totals"][0] == pytest.approx(2.0 if method == "qsc" else 1.0)


def test_release_functional_bottom(capsys):
    out = as_json(capsys, "release-functional", "--n", "40", "--d", "3")
    assert out["bottom"] and out["value"] is None


def test_release_functional(capsys):
    out = as_json(capsys, "release-functional", "--n", "20000", "--d", "5", "--eps", "4", "--coord", "2")
    assert not out["bottom"]
    assert out["ledger_totals"][0] == pytest.approx(12.0)


@pytest.mark.parametrize("name", ["objective", "naive", "nonprivate", "dpsgd"])
def test_baseline(capsys, name):
    out = as_json(capsys, "baseline", "--name", name, "--n", "1000", "--d", "3", "--loss", "logistic")
    assert len(out["value"]) == 3


def test_seed_determinism(capsys):
    args = ("release-theta", "--n", "5000", "--d", "3", "--seed", "4", "--delta", "0.01")
    assert run(capsys, *args) == run(capsys, *args)


def test_csv_input(tmp_path, capsys):
    p = tmp_path / "d.csv"
    rows = ["a,b,income"] + [f"{(i % 7) / 7 - 0.4:.3f},{(i % 5) / 5 - 0.5:.3f},{30000 + 97 * i}" for i in range(200)]
    p.write_text("\n".join(rows) + "\n")
    out = as_json(
        capsys, "fit", "--csv", str(p), "--features", "a,b", "--label", "income",
        "--label-threshold", "40000", "--loss", "logistic", "--lambda-reg", "0.1",
    )
    assert len(out["theta"]) == 2


def test_experiment_and_report(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"mechanisms": ["nonprivate", "local"], "n_grid": [300], "eps_grid": [1.0], "d": 3, "seeds": 2}))
    out_dir = tmp_path / "out"
    text = run(capsys, "experiment", "--config", str(cfg), "--out", str(out_dir), "--eps", "2")
    assert "4 rows" in text
    lines = (out_dir / "results.csv").read_text().splitlines()
    assert len(lines) == 5 and all(",2.0," in ln for ln in lines[1:])
    run(capsys, "report", "--results", str(out_dir / "results.csv"), "--out", str(tmp_path / "again"))
    assert (tmp_path / "again" / "aggregate.csv").read_text() == (out_dir / "aggregate.csv").read_text()


def test_config_flag_override(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n": 300, "d": 2, "lambda_reg": 0.5}))
    a = as_json(capsys, "fit", "--config", str(cfg))
    assert len(a["theta"]) == 2 and a["lambda_min"] >= 0.5
    b = as_json(capsys, "fit", "--config", str(cfg), "--d", "4")
    assert len(b["theta"]) == 4


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "dpmestim", "fit", "--n", "100", "--d", "2"], capture_output=True, text=True)
    assert proc.returncode == 0 and "theta" in proc.stdout


def test_bad_command():
    with pytest.raises(SystemExit):
        main(["nonsense"])

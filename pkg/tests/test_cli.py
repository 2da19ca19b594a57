import csv
import json
from pathlib import Path

import pytest

from mts2.cli import main
from mts2.experiments import CSV_HEADER
from mts2.model import baseline

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
BASE = str(CONFIGS / "base.json")
KAPPA20 = str(CONFIGS / "kappa20.json")


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv)
    assert code == 0, err
    return json.loads(out)


def test_shipped_configs_match_baseline():
    assert json.loads(Path(BASE).read_text()) == baseline().to_config()
    assert json.loads(Path(KAPPA20).read_text()) == baseline(kappa=20).to_config()


def test_measures(capsys):
    doc = run_json(capsys, "measures", "--config", BASE, "--S", "1", "0", "--lam", "0.45", "0")
    assert doc["type1"]["expected_inventory"] == pytest.approx(0.55)
    assert doc["type2"]["stockout_prob"] == 1.0
    same = run_json(capsys, "measures", "--config", BASE, "--S", "1", "0", "--q", "1", "0")
    assert same == doc


def test_equilibrium(capsys):
    doc = run_json(capsys, "equilibrium", "--config", KAPPA20, "--S", "1", "0")
    assert doc["kind"] == "unique"
    assert doc["case_label"] == "(1,0)"
    assert [doc["q1"], doc["q2"]] == [1.0, 0.0]


def test_producer_and_planner(capsys):
    doc = run_json(capsys, "producer", "--config", KAPPA20)
    assert doc["policy"] == {"S1": 1, "S2": 0}
    assert doc["profit"] == pytest.approx(2.03)
    doc = run_json(capsys, "planner", "--config", KAPPA20)
    assert doc["policy"] == {"S1": 2, "S2": 0}
    assert doc["welfare"] == pytest.approx(3.46396, abs=1e-5)


def test_tolls(capsys):
    doc = run_json(capsys, "tolls", "--config", KAPPA20)
    assert doc["tolls"][0] == pytest.approx(3.8955, abs=1e-4)
    assert doc["tolled_equilibrium"]["q1"] == pytest.approx(doc["target_profile"]["q1"], abs=1e-6)
    fixed = run_json(capsys, "tolls", "--config", KAPPA20, "--S", "2", "0")
    assert fixed["policy"] == {"S1": 2, "S2": 0}


def test_simulate_and_seed_precedence(capsys, monkeypatch):
    args = ("simulate", "--config", BASE, "--S", "1", "1", "--lam", "0.3", "0.3",
            "--arrivals", "2000", "--replications", "2")
    default = run_json(capsys, *args)
    assert default["config"]["seed"] == 12345
    monkeypatch.setenv("MTS2_SEED", "7")
    env = run_json(capsys, *args)
    assert env["config"]["seed"] == 7
    assert env["estimates"] != default["estimates"]
    flag = run_json(capsys, *args, "--seed", "12345", "--compare")
    assert flag["config"]["seed"] == 12345
    assert flag["estimates"] == default["estimates"]
    assert "z" in flag["comparison"]["type1"]["mean_wait"]
    monkeypatch.setenv("MTS2_SEED", "x")
    code, _, err = run(capsys, *args)
    assert code == 2 and json.loads(err)["error"] == "validation"


def test_sweep_to_file(capsys, tmp_path):
    out = tmp_path / "grid.csv"
    code, _, err = run(capsys, "sweep", "--config", BASE, "--kappa", "1:2:1", "--rho", "0.8:0.85:0.05",
                       "--threads", "1", "--out", str(out))
    assert code == 0, err
    rows = list(csv.reader(out.open()))
    assert tuple(rows[0]) == CSV_HEADER
    assert len(rows) == 5
    assert all(r[-1] == "ok" for r in rows[1:])


def test_cross_section_to_stdout(capsys):
    code, out, _ = run(capsys, "cross-section", "--config", BASE, "--kappa", "19:20:1", "--threads", "1")
    assert code == 0
    rows = list(csv.reader(out.splitlines()))
    assert len(rows) == 1 + 2 * 3
    assert {r[0] for r in rows[1:]} == {"19", "20"}


def test_usage_errors(capsys):
    for argv in ([], ["bogus"], ["equilibrium", "--config", BASE], ["sweep", "--config", BASE, "--kappa", "1:2"],
                 ["measures", "--config", BASE, "--S", "1", "1", "--q", "1", "1", "--lam", "0.1", "0.1"]):
        code, _, err = run(capsys, *argv)
        assert code == 1
        assert json.loads(err)["error"] == "usage"


def test_validation_errors(capsys, tmp_path):
    unstable = tmp_path / "unstable.json"
    doc = baseline().to_config()
    doc["lambda_cap"] = [0.5, 0.5]
    unstable.write_text(json.dumps(doc))
    code, out, err = run(capsys, "producer", "--config", str(unstable))
    assert code == 2 and out == ""
    assert json.loads(err)["error"] == "StabilityViolation"
    code, _, err = run(capsys, "measures", "--config", BASE, "--S", "1", "1", "--lam", "0.5", "0.1")
    assert code == 2
    code, _, _ = run(capsys, "producer", "--config", str(tmp_path / "missing.json"))
    assert code == 2


def test_solver_error_exit_code(capsys, tmp_path):
    empty = tmp_path / "empty.json"
    doc = baseline().to_config()
    doc["lambda_cap"] = [0.0, 0.0]
    empty.write_text(json.dumps(doc))
    code, _, err = run(capsys, "planner", "--config", str(empty))
    assert code == 3
    assert json.loads(err)["error"] == "EmptyFeasibleRegion"


def test_out_flag_writes_json(capsys, tmp_path):
    out = tmp_path / "eq.json"
    code, stdout, _ = run(capsys, "equilibrium", "--config", BASE, "--S", "0", "0", "--out", str(out))
    assert code == 0 and stdout == ""
    doc = json.loads(out.read_text())
    assert doc["kind"] in {"unique", "continuum"}
    # strict JSON only: no NaN or Infinity tokens
    json.loads(out.read_text(), parse_constant=lambda c: pytest.fail(f"non-finite {c}"))

import json
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from mixfam.cli import RESULT_SCHEMA, main

DATA = Path(__file__).resolve().parents[1] / "demos" / "data"


def run(tmp_path, *argv):
    return main([*argv, "--out", str(tmp_path)])


def test_capacity_run(tmp_path, capsys):
    code = run(tmp_path, "run", "--problem", "capacity", "--channel", str(DATA / "bsc01.json"), "--gamma", "1")
    assert code == 0
    result = json.loads((tmp_path / "capacity_gamma1.json").read_text())
    jsonschema.validate(result, RESULT_SCHEMA)
    assert result["headline"]["capacity_nats"] == pytest.approx(0.3680642, abs=1e-7)
    header = (tmp_path / result["trace"]).read_text().splitlines()[0]
    assert header == "iter,objective,step_kl,kappa,dual_iters,dual_residual,selection_score"


def test_restricted_c4x4_three_traces(tmp_path):
    code = run(tmp_path, "run", "--problem", "commitment", "--channel", str(DATA / "commitment4x4.json"),
               "--gamma", "1,0.95,0.9", "--restrict", "1,2,3")
    assert code == 0
    assert sorted(p.name for p in tmp_path.glob("*.csv")) == [
        "commitment_gamma0.9.csv",
        "commitment_gamma0.95.csv",
        "commitment_gamma1.csv",
    ]


def _summary(path):
    lines = path.read_text().splitlines()
    rows = [dict(zip(lines[0].split(","), line.split(","))) for line in lines[1:]]
    return rows


def test_full_c4x4_sweep(tmp_path):
    code = run(tmp_path, "sweep", "--problem", "commitment", "--channel", str(DATA / "commitment4x4.json"), "--gamma", "1,0.95,0.9")
    assert code == 0
    rows = _summary(tmp_path / "commitment_summary.csv")
    by_gamma = {float(r["gamma"]): r for r in rows}
    assert int(by_gamma[0.9]["iterations_to_1e-6"]) < int(by_gamma[1.0]["iterations_to_1e-6"])
    finals = [float(r["final_objective"]) for r in rows]
    assert max(finals) - min(finals) <= 1e-6


def test_restricted_c4x4_sweep_no_gain(tmp_path):
    run(tmp_path, "sweep", "--problem", "commitment", "--channel", str(DATA / "commitment4x4.json"),
        "--gamma", "1,0.95,0.9", "--restrict", "1,2,3")
    rows = {float(r["gamma"]): r for r in _summary(tmp_path / "commitment_summary.csv")}
    assert int(rows[0.9]["iterations_to_1e-6"]) >= int(rows[1.0]["iterations_to_1e-6"])


def test_sweep_determinism(tmp_path, monkeypatch):
    monkeypatch.setenv("MIXFAM_THREADS", "2")
    run(tmp_path, "sweep", "--problem", "capacity", "--channel", str(DATA / "bsc01.json"), "--gamma", "0.8,0.8")
    a, b = tmp_path / "capacity_gamma0.8.csv", tmp_path / "capacity_gamma0.8.json"
    first = a.read_bytes(), b.read_bytes()
    other = tmp_path / "again"
    monkeypatch.setenv("MIXFAM_THREADS", "1")
    run(other, "sweep", "--problem", "capacity", "--channel", str(DATA / "bsc01.json"), "--gamma", "0.8,0.8")
    assert (other / a.name).read_bytes() == first[0]
    assert (other / b.name).read_bytes() == first[1]


def test_missing_alpha(tmp_path, capsys):
    code = run(tmp_path, "run", "--problem", "reliability", "--channel", str(DATA / "bsc01.json"))
    assert code == 1
    assert "--alpha" in capsys.readouterr().err


def test_gamma_zero_rejected(tmp_path, capsys):
    code = run(tmp_path, "sweep", "--problem", "capacity", "--channel", str(DATA / "bsc01.json"), "--gamma", "1,0")
    assert code == 1
    assert "--gamma" in capsys.readouterr().err


def test_single_gamma_sweep_rejected(tmp_path):
    assert run(tmp_path, "sweep", "--problem", "capacity", "--channel", str(DATA / "bsc01.json"), "--gamma", "1") == 1


def test_malformed_channel(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"rows": [[0.5, 0.5], [0.3, 0.3]]}))
    assert run(tmp_path, "run", "--problem", "capacity", "--channel", str(bad)) == 1
    assert "--channel.rows" in capsys.readouterr().err
    bad.write_text(json.dumps({"matrix": [[1.0]]}))
    assert run(tmp_path, "run", "--problem", "capacity", "--channel", str(bad)) == 1
    assert "--channel.rows: missing" in capsys.readouterr().err
    bad.write_text("{not json")
    assert run(tmp_path, "run", "--problem", "capacity", "--channel", str(bad)) == 1


def test_infeasible_budget(tmp_path, capsys):
    code = run(tmp_path, "run", "--problem", "capacity", "--channel", str(DATA / "bsc01.json"),
               "--cost", "0,1", "--budget", "1.5")
    assert code == 1
    assert "--budget" in capsys.readouterr().err


def test_cost_constrained_defaults_to_approx(tmp_path):
    code = run(tmp_path, "run", "--problem", "capacity", "--channel", str(DATA / "bsc01.json"),
               "--cost", "0,1", "--budget", "0.2")
    assert code == 0
    result = json.loads((tmp_path / "capacity_gammadefault.json").read_text())
    assert result["algorithm"] == "approx"
    jsonschema.validate(result, RESULT_SCHEMA)


def test_iteration_cap_exit_code(tmp_path):
    code = run(tmp_path, "run", "--problem", "capacity", "--channel", str(DATA / "bsc01.json"), "--max-iter", "0")
    assert code == 2


def test_descent_violation_exit_code(tmp_path):
    ch = tmp_path / "ch.json"
    ch.write_text(json.dumps({"rows": [[0.9, 0.05, 0.05], [0.05, 0.9, 0.05], [0.3, 0.3, 0.4]]}))
    assert run(tmp_path, "run", "--problem", "capacity", "--channel", str(ch), "--gamma", "0.05") == 3


def test_ib_and_em_inputs(tmp_path):
    joint = tmp_path / "joint.json"
    joint.write_text(json.dumps({"joint": [[0.45, 0.05], [0.05, 0.45]], "t_size": 2}))
    assert run(tmp_path, "run", "--problem", "ib", "--joint", str(joint), "--alpha", "0.5", "--beta", "1",
               "--restarts", "3") == 0
    res = json.loads((tmp_path / "ib_gammadefault.json").read_text())
    assert res["gamma_used"] == 0.5
    jsonschema.validate(res, RESULT_SCHEMA)
    fam = tmp_path / "fam.json"
    fam.write_text(json.dumps({"features": [[0, 1, 2]], "targets": [0.5]}))
    efam = tmp_path / "efam.json"
    efam.write_text(json.dumps({"base": [0.2, 0.3, 0.5], "generators": [[1, 0, 0]]}))
    assert run(tmp_path, "run", "--problem", "em", "--family", str(fam), "--efam", str(efam)) == 0
    assert run(tmp_path, "run", "--problem", "reverse-em", "--family", str(fam), "--efam", str(efam)) == 0


def test_bits_only_affects_summary(tmp_path, capsys):
    run(tmp_path, "run", "--problem", "capacity", "--channel", str(DATA / "bsc01.json"), "--bits")
    out = capsys.readouterr().out
    assert "bits" in out
    result = json.loads((tmp_path / "capacity_gammadefault.json").read_text())
    assert result["headline"]["capacity_nats"] == pytest.approx(0.3680642, abs=1e-7)


def test_hidden_grid(tmp_path, capsys):
    code = main(["grid", "--problem", "capacity", "--channel", str(DATA / "bsc01.json"), "--resolution", "2000"])
    assert code == 0
    out = json.loads(capsys.readouterr().out)
    assert out["value"] == pytest.approx(-0.3680642, abs=1e-5)


def test_usage_error_exit_one():
    with pytest.raises(SystemExit) as e:
        main(["run"])
    assert e.value.code == 1

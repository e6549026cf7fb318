"""End-to-end runs of the command line, exercising exit codes and files."""

import csv
import json

import pytest

from swigident import Derivation, save_model, random_model, figure2, to_swig
from swigident.cli import main

from conftest import corrupt_step


@pytest.fixture()
def fig1_path(tmp_path):
    path = tmp_path / "fig1.swig"
    assert main(["fixture", "fig1", "--out", str(path)]) == 0
    return str(path)


def test_fixture_prints_graph(capsys):
    assert main(["fixture", "fig1"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("graph fig1 {")
    assert "target D1 order=1;" in out

    assert main(["fixture", "nonesuch"]) == 1
    assert "error:" in capsys.readouterr().err


def test_identify_prints_trace_and_formula(fig1_path, capsys):
    code = main(
        ["identify", fig1_path, "q[1](Y1 | do D1=d1)", "--strategy", "backdoor:L"]
    )
    out = capsys.readouterr().out
    assert code == 0
    assert "status: identified" in out
    assert out.rstrip().endswith("sum{l} q0(Y1 | L=l, D1=d1) * q0(L=l)")


def test_identify_verify_round_trip(fig1_path, tmp_path, capsys):
    deriv_path = tmp_path / "derivation.json"
    code = main(
        [
            "identify",
            fig1_path,
            "q[1](Y1 | do D1=d1)",
            "--json",
            "--out",
            str(deriv_path),
        ]
    )
    assert code == 0

    blob = deriv_path.read_text()
    payload = json.loads(blob)
    derivation = Derivation.from_json(payload)
    assert derivation.identified
    assert blob == json.dumps(payload, sort_keys=True, indent=2) + "\n"

    assert main(["verify", fig1_path, str(deriv_path), "--models", "5"]) == 0
    out = capsys.readouterr().out
    assert "verdict: pass" in out

    assert main(["verify", fig1_path, str(deriv_path), "--models", "5", "--json"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["passed"] is True
    assert len(report["steps"]) == len(payload["steps"])


def test_verify_flags_corrupted_derivation(fig1, fig1_path, tmp_path, capsys):
    deriv_path = tmp_path / "derivation.json"
    main(["identify", fig1_path, "q[1](Y1 | do D1=d1)", "--json", "--out", str(deriv_path)])
    derivation = Derivation.from_json(json.loads(deriv_path.read_text()))
    bad = corrupt_step(derivation, fig1, len(derivation.steps) - 1)
    bad_path = tmp_path / "bad.json"
    bad_path.write_text(json.dumps(bad.to_json()))

    assert main(["verify", fig1_path, str(bad_path), "--models", "5"]) == 2
    assert "FAIL" in capsys.readouterr().out


def test_identify_not_identified_exits_2(tmp_path, capsys):
    path = tmp_path / "ablated.swig"
    main(["fixture", "fig1_ablated", "--out", str(path)])
    code = main(["identify", str(path), "q[1](Y1 | do D1=d1)"])
    out = capsys.readouterr().out
    assert code == 2
    assert "status: not_identified" in out
    assert "blocking:" in out


def test_identify_unobserved_flag_switches_formula(fig1_path, capsys):
    code = main(["identify", fig1_path, "q[1](Y1 | do D1=d1)", "--unobserved", "L"])
    out = capsys.readouterr().out
    assert code == 0
    final = out.rstrip().splitlines()[-1]
    assert "L" not in final  # front-door style formula avoids the hidden variable

    assert main(["identify", fig1_path, "q[1](Y1 | do D1=d1)", "--unobserved", "Zed"]) == 1
    assert "not in graph" in capsys.readouterr().err


def test_dsep_answers_both_ways(fig1_path, capsys):
    assert main(["dsep", fig1_path, "q[1]: Y1 _||_ Do1 | M1, D1"]) == 0
    assert capsys.readouterr().out == "true\n"

    assert main(["dsep", fig1_path, "q[1]: Y1 _||_ Do1"]) == 0
    assert capsys.readouterr().out == "false\n"

    assert main(["dsep", fig1_path, "q[1]: Y1 _||_ Do1 | M1, D1", "--json"]) == 0
    blob = json.loads(capsys.readouterr().out)
    assert blob["d_separated"] is True
    assert blob["query"]["regime"] == [1]


def test_simulate_couples_interventions_observationally(fig1_path, tmp_path):
    out = tmp_path / "rows.csv"
    assert main(["simulate", fig1_path, "--n", "200", "--seed", "3", "--out", str(out)]) == 0
    with open(out, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 200
    assert set(rows[0]) == {"L", "D1", "Do1", "M1", "Y1"}
    assert all(r["D1"] == r["Do1"] for r in rows)

    again = tmp_path / "again.csv"
    main(["simulate", fig1_path, "--n", "200", "--seed", "3", "--out", str(again)])
    assert again.read_text() == out.read_text()

    dosed = tmp_path / "dosed.csv"
    main(
        ["simulate", fig1_path, "--n", "200", "--seed", "3", "--regime", "1", "--out", str(dosed)]
    )
    with open(dosed, newline="") as fh:
        rows1 = list(csv.DictReader(fh))
    assert any(r["D1"] != r["Do1"] for r in rows1)


def test_simulate_seed_env_default(fig1_path, tmp_path, monkeypatch):
    monkeypatch.setenv("SWIG_IDENT_SEED", "7")
    a = tmp_path / "a.csv"
    main(["simulate", fig1_path, "--n", "50", "--out", str(a)])
    b = tmp_path / "b.csv"
    main(["simulate", fig1_path, "--n", "50", "--seed", "7", "--out", str(b)])
    assert a.read_text() == b.read_text()


def test_simulate_model_file(fig1, fig1_path, tmp_path, capsys):
    model_path = tmp_path / "model.json"
    save_model(random_model(fig1, seed=5), str(model_path))
    out = tmp_path / "rows.csv"
    assert main(
        ["simulate", fig1_path, "--model", str(model_path), "--n", "20", "--out", str(out)]
    ) == 0

    other = tmp_path / "other.json"
    save_model(random_model(to_swig(figure2(2)), seed=5), str(other))
    assert main(["simulate", fig1_path, "--model", str(other), "--n", "20"]) == 1
    assert "does not match" in capsys.readouterr().err


def test_dot_regimes(fig1_path, capsys):
    assert main(["dot", fig1_path]) == 0
    assert '"D1" -> "Do1";' in capsys.readouterr().out
    assert main(["dot", fig1_path, "--regime", "1"]) == 0
    assert '"D1" -> "Do1";' not in capsys.readouterr().out
    assert main(["dot", fig1_path, "--regime", "4"]) == 1
    assert "error:" in capsys.readouterr().err


def test_usage_errors_exit_1(fig1_path, tmp_path, capsys):
    assert main(["identify", str(tmp_path / "missing.swig"), "q[1](Y1 | do D1=d1)"]) == 1
    assert "error:" in capsys.readouterr().err

    assert main(["identify", fig1_path, "q[9](Y1 | do D1=d1)"]) == 1
    assert "exceeds" in capsys.readouterr().err

    assert main(["identify", fig1_path, "q[1](Y1 | do D1=d1)", "--strategy", "magic"]) == 1
    assert "unknown strategy" in capsys.readouterr().err

import json

import pytest

from nschwet.cli import EXIT_FAIL, EXIT_INPUT, EXIT_OK, EXIT_SOLVER, main
from nschwet.fixtures import get_fixture
from nschwet.harness import write_sweep_csv

from conftest import small_config


@pytest.fixture
def tiny_case(tmp_path):
    path = tmp_path / "tiny.json"
    small_config().save(path)
    return str(path)


def test_unknown_case_is_input_error(tmp_path, capsys):
    assert main(["run", "--case", "nope", "--out", str(tmp_path)]) == EXIT_INPUT
    assert "unknown case" in capsys.readouterr().err


def test_bad_override_and_missing_args_are_input_errors(tiny_case, tmp_path):
    assert main(["run", "--case", tiny_case, "--out", str(tmp_path), "--set", "fluids.bogus=1"]) == EXIT_INPUT
    assert main(["run", "--case", tiny_case]) == EXIT_INPUT
    assert main([]) == EXIT_INPUT


def test_run_writes_outputs(tiny_case, tmp_path, capsys):
    out = tmp_path / "run"
    code = main(["run", "--case", tiny_case, "--out", str(out), "--set", "numerics.t_end=0.05"])
    assert code == EXIT_FAIL  # stopped before equilibrium
    text = capsys.readouterr().out
    assert "status: not_equilibrated" in text and "dx=" in text
    info = json.loads((out / "status.json").read_text())
    assert info["steps"] == 25
    assert main(["wedge", str(out)]) in (EXIT_OK, EXIT_FAIL)
    report = json.loads(capsys.readouterr().out)
    assert report["classification"] == "near-critical"


def test_run_reports_solver_failure(tiny_case, tmp_path, monkeypatch):
    from nschwet.cahnhilliard import StepFailure
    from nschwet.harness import CaseRun

    def boom(self, state, dt):
        raise StepFailure("synthetic")

    monkeypatch.setattr(CaseRun, "step", boom)
    assert main(["run", "--case", tiny_case, "--out", str(tmp_path)]) == EXIT_SOLVER


def _table4_csv(path):
    fx = get_fixture("table4")
    lines = ["eps,dx,theta,F_S"]
    for r in fx.rows:
        si = r.si(fx.units)
        lines.append(f"{r.params['eps']!r},{si['dx']!r},{si['theta']!r},{si['F_S']!r}")
    path.write_text("\n".join(lines) + "\n")
    return str(path)


def test_fit_exp_on_table4(tmp_path, capsys):
    f = _table4_csv(tmp_path / "t4.csv")
    assert main(["analyze", "fit-exp", f, "--column", "F_S"]) == EXIT_OK
    res = json.loads(capsys.readouterr().out)
    assert -0.45 <= res["c"] <= -0.15
    assert main(["analyze", "fit-exp", f]) == EXIT_OK
    assert set(json.loads(capsys.readouterr().out)) == {"dx", "theta", "F_S"}
    assert main(["analyze", "fit-exp", f, "--column", "zz"]) == EXIT_INPUT


def test_extrapolate_table5(tmp_path, capsys):
    fx = get_fixture("table5")
    rows = [r for r in fx.diffuse_rows() if r.params["s"] == 2e-3]
    lines = ["eps,dx"] + [f"{r.params['eps']!r},{r.dx!r}" for r in rows]
    f = tmp_path / "t5.csv"
    f.write_text("\n".join(lines) + "\n")
    assert main(["analyze", "extrapolate", str(f)]) == EXIT_OK
    res = json.loads(capsys.readouterr().out)
    assert res["extrapolated"]["dx"] == pytest.approx(6.167, abs=0.05)


def test_analyze_input_errors(tmp_path):
    assert main(["analyze", "fit-exp", str(tmp_path / "missing.csv")]) == EXIT_INPUT
    f = tmp_path / "short.csv"
    f.write_text("eps,dx\n1e-3,1\n5e-4,2\n")
    assert main(["analyze", "extrapolate", str(f)]) == EXIT_INPUT
    assert main(["analyze", "fit-exp", str(f)]) == EXIT_INPUT


def test_compare_sweep_directory(tmp_path, capsys):
    fx = get_fixture("table2")
    rows = []
    for r in fx.diffuse_rows()[:3]:
        si = r.si(fx.units)
        rows.append({"eps": r.params["eps"], "m": r.params["m"], "s_m": r.params["s"],
                     "s_nu": r.params["s"], "u_w": 4e-3, **si, "status": "equilibrated"})
    write_sweep_csv(tmp_path / "sweep.csv", rows)
    assert main(["compare", "--fixture", "table2", str(tmp_path)]) == EXIT_OK
    assert capsys.readouterr().out.strip().endswith("PASS")
    assert (tmp_path / "compare_table2.json").is_file()
    rows[0]["dx"] *= 1.3
    write_sweep_csv(tmp_path / "sweep.csv", rows)
    assert main(["compare", "--fixture", "table2", str(tmp_path)]) == EXIT_FAIL


def test_compare_input_errors(tmp_path):
    assert main(["compare", "--fixture", "table2", str(tmp_path / "none")]) == EXIT_INPUT
    assert main(["compare", "--fixture", "table2", str(tmp_path)]) == EXIT_INPUT
    assert main(["compare", "--fixture", "table9", str(tmp_path)]) == EXIT_INPUT
    assert main(["wedge", str(tmp_path)]) == EXIT_INPUT

import csv
import json
import math

import mock
import numpy as np
import pytest

from CM_QOperator.Config.ExperimentConfig import load_config
from CM_QOperator.Errors import ConfigError, ParameterError, PoleError, exit_code_for
from CM_QOperator.Experiments import run, sweep
from CM_QOperator.Reports import (
    SWEEP_COLUMNS,
    SweepRow,
    VerificationReport,
    validate_report,
    write_sweep_csv,
)
from CM_QOperator.cmqop import main


def make_report(exploratory=False):
    return VerificationReport(experiment="diff-eq", config={"experiment": "diff-eq", "N": 2, "lam": 1.7, "seed": 0},
                              exploratory=exploratory)


########################################################################
## REPORTS
########################################################################
def test_add_check_judgement():
    report = make_report()
    assert report.passed
    assert report.add_check("small", 1e-12, 1e-10).passed is True
    assert report.add_check("envelope", 3.0, judged=False).passed is None
    assert report.passed
    assert report.add_check("large", 1e-3, 1e-10).passed is False
    assert not report.passed
    assert report.headline.name == "small"


def test_exploratory_reports_are_not_judged():
    report = make_report(exploratory=True)
    report.add_check("large", 1.0, 1e-10)
    assert report.checks[0].passed is None
    assert report.passed
    assert "(exploratory)" in report.format_table()


def test_report_dict_round_trip(tmp_path):
    report = make_report()
    report.add_check("difference equation", 2.5e-16, 1e-10)
    report.diagnose(u=[0.5, -0.5], mu_xi_abs=0.8)
    path = tmp_path / "report.json"
    report.write_json(str(path))
    again = VerificationReport.read_json(str(path))
    assert again.to_dict() == report.to_dict()
    validate_report(json.loads(path.read_text()))


def test_read_missing_report(tmp_path):
    with pytest.raises(ConfigError, match="does not exist"):
        VerificationReport.read_json(str(tmp_path / "none.json"))


def test_schema_rejects_malformed_reports():
    data = make_report().to_dict()
    data["passed"] = "yes"
    with pytest.raises(ConfigError, match="report-v1"):
        validate_report(data)
    data = make_report().to_dict()
    data["experiment"] = "spectral-flow"
    with pytest.raises(ConfigError):
        validate_report(data)


def test_checks_csv(tmp_path):
    report = make_report()
    report.add_check("difference equation", 2.5e-16, 1e-10)
    report.add_check("envelope", 3.0, judged=False)
    path = tmp_path / "checks.csv"
    report.write_csv(str(path))
    with open(path, newline="") as handle:
        rows = list(csv.reader(handle))
    assert rows[0] == ["name", "value", "tolerance", "passed"]
    assert rows[1][3] == "True"
    assert rows[2][2:] == ["", ""]


def test_sweep_rows_and_csv(tmp_path):
    report = make_report()
    report.add_check("difference equation", 1e-15, 1e-10)
    report.diagnose(mu_xi_abs=0.8)
    rows = [SweepRow.from_report("xi", 0.1, report), SweepRow.from_error("xi", 0.2, PoleError("pole"))]
    assert rows[0].passed and rows[0].mu_xi == 0.8
    assert not rows[1].passed and math.isnan(rows[1].residual)
    path = tmp_path / "sweep.csv"
    write_sweep_csv(rows, str(path))
    with open(path, newline="") as handle:
        table = list(csv.reader(handle))
    assert tuple(table[0]) == SWEEP_COLUMNS
    assert table[2][-1] == "Error: pole"


########################################################################
## EXPERIMENT RUNS
########################################################################
def test_diff_eq_run_is_reproducible(isolated_cwd):
    config = load_config("diff-eq", overrides={"seed": 7})
    first = run(config)
    second = run(config)
    assert first.passed
    assert [c.value for c in first.checks] == [c.value for c in second.checks]
    assert first.diagnostics["u"] == second.diagnostics["u"]
    validate_report(first)


def test_fourier_gamma_run(isolated_cwd):
    report = run(load_config("fourier-gamma"))
    assert report.passed
    pairs = {(row["lam"], row["v"]) for row in report.diagnostics["values"]}
    assert pairs == {(lam, v) for lam in (1.0, 1.5, 2.0, 3.5) for v in (0.0, 0.7, 2.0)}


def test_fourier_gamma_run_adds_configured_lambda(isolated_cwd):
    report = run(load_config("fourier-gamma", overrides={"lam": 2.5, "v": [0.4]}))
    assert report.passed
    assert [row["lam"] for row in report.diagnostics["values"]] == [2.5, 1.0, 1.5, 2.0, 3.5]


def test_kernel_identity_run(isolated_cwd):
    report = run(load_config("kernel-id"))
    assert [c.name for c in report.checks] == ["kernel identity H_1", "kernel identity H_2"]
    assert report.passed


def test_mu_asymptotic_run(isolated_cwd):
    assert run(load_config("mu-asymptotic")).passed


def test_commutator_rank_one_run(isolated_cwd):
    report = run(load_config("commutator", overrides={"N": 1, "refine": False}))
    names = [c.name for c in report.checks]
    assert names[:3] == ["Hermiticity defect", "plane-wave action", "leading eigenvalue / norm bound - 1"]
    assert report.checks[0].passed and report.checks[1].passed and report.checks[2].passed


@pytest.mark.slow
def test_commutator_run_refines_towards_the_base_grid(isolated_cwd):
    report = run(load_config("commutator"))
    assert report.passed
    assert [c.name for c in report.checks] == ["Hermiticity defect", "commutator [Q_xi, Q_xi2]", "refinement ratio"]
    assert report.diagnostics["refinement_panels"] == [3, 6]
    assert report.diagnostics["refined_commutator"] < report.diagnostics["coarse_commutator"]


def test_commutator_refinement_needs_even_panels_over_the_node_limit(isolated_cwd):
    with pytest.raises(ConfigError, match="even panel count"):
        run(load_config("commutator", overrides={"panels": 7, "order": 5}))


@pytest.mark.slow
def test_asymptotics_run(isolated_cwd):
    report = run(load_config("asymptotics"))
    names = [c.name for c in report.checks]
    for k in (1, 2, 3):
        assert "ray %d defect slope |s - 1|" % k in names
    assert report.passed
    directions = [ray["direction"] for ray in report.diagnostics["rays"]]
    assert len({tuple(d) for d in directions}) == 3
    assert report.diagnostics["rays"][0]["defect"] != report.diagnostics["rays"][1]["defect"]


@pytest.mark.slow
def test_integral_equation_run_three_particles(isolated_cwd):
    report = run(load_config("int-eq", overrides={"N": 3}))
    assert report.passed
    assert report.checks[0].value <= 1e-3


@pytest.mark.slow
@pytest.mark.parametrize("lam", [1.0, 2.0])
def test_kernel_identity_run_three_particles(isolated_cwd, lam):
    report = run(load_config("kernel-id", overrides={"N": 3, "lam": lam}))
    assert [c.name for c in report.checks] == ["kernel identity H_1", "kernel identity H_2", "kernel identity H_3"]
    assert report.passed


def test_asymptotics_needs_pairs(isolated_cwd):
    with pytest.raises(ConfigError):
        run(load_config("asymptotics", overrides={"N": 1}))


def test_sweep_records_failing_rows(isolated_cwd):
    config = load_config("diff-eq", overrides={"samples": 0})
    rows = sweep(config, "lambda", [1.7, -1.0])
    assert rows[0].passed
    assert not rows[1].passed
    assert "lambda" in rows[1].error


def test_sweep_records_foreign_numeric_failures(isolated_cwd):
    config = load_config("diff-eq", overrides={"samples": 0})
    failing = mock.Mock(side_effect=FloatingPointError("overflow"))
    with mock.patch.dict("CM_QOperator.Experiments.RUNNERS", {"diff-eq": failing}):
        rows = sweep(config, "xi", [0.1, 0.2])
    assert [row.passed for row in rows] == [False, False]
    assert "overflow" in rows[0].error


def test_sweep_axis_checks(isolated_cwd):
    config = load_config("diff-eq")
    with pytest.raises(ConfigError):
        sweep(config, "grid-refinement", [2, 4])
    with pytest.raises(ConfigError):
        sweep(config, "xi", [])


########################################################################
## COMMAND LINE
########################################################################
def test_cli_run_writes_valid_report(isolated_cwd, capsys):
    assert main(["diff-eq", "--samples", "5", "--json", "report.json", "--csv", "checks.csv"]) == 0
    assert "difference equation" in capsys.readouterr().out
    data = json.loads((isolated_cwd / "report.json").read_text())
    validate_report(data)
    assert data["passed"] is True
    assert data["config"]["samples"] == 5
    assert (isolated_cwd / "checks.csv").exists()


def test_cli_config_errors(isolated_cwd, capsys):
    assert main(["diff-eq", "--lambda", "-1"]) == 2
    assert "Error in config field 'lambda'" in capsys.readouterr().err
    assert main(["diff-eq", "--config", "missing.json"]) == 2


def test_cli_numeric_failure(isolated_cwd, capsys):
    with mock.patch("CM_QOperator.cmqop.run", side_effect=PoleError("Gamma pole at z = -1")):
        assert main(["diff-eq"]) == 3
    assert "Error: Gamma pole" in capsys.readouterr().err


@pytest.mark.parametrize("error", [np.linalg.LinAlgError("singular matrix"), FloatingPointError("overflow")])
def test_cli_foreign_numeric_failure(isolated_cwd, capsys, error):
    with mock.patch("CM_QOperator.cmqop.run", side_effect=error):
        assert main(["diff-eq"]) == 3
    assert "Error: numeric failure (%s)" % type(error).__name__ in capsys.readouterr().err


def test_cli_io_failure(isolated_cwd, capsys):
    assert main(["diff-eq", "--samples", "0", "--json", "missing_dir/report.json"]) == 2
    assert "Error: I/O failure" in capsys.readouterr().err
    with mock.patch("CM_QOperator.cmqop.run", side_effect=PermissionError("denied")):
        assert main(["diff-eq"]) == 2


def test_exit_code_mapping():
    assert exit_code_for(ConfigError("bad", field="N")) == 2
    assert exit_code_for(ParameterError("bad")) == 2
    assert exit_code_for(PoleError("pole")) == 3
    assert exit_code_for(FileNotFoundError("gone")) == 2
    assert exit_code_for(ZeroDivisionError()) == 3
    assert exit_code_for(np.linalg.LinAlgError()) == 3


def test_cli_failed_check(isolated_cwd):
    report = make_report()
    report.add_check("difference equation", 1e-3, 1e-10)
    with mock.patch("CM_QOperator.cmqop.run", return_value=report):
        assert main(["diff-eq"]) == 1


def test_cli_sweep(isolated_cwd, capsys):
    code = main(["sweep", "diff-eq", "--axis", "xi", "--values", "0,0.5,1", "--samples", "0",
                 "--csv", "sweep.csv", "--plot", "sweep.png"])
    assert code == 0
    out = capsys.readouterr().out
    assert out.count("difference equation") == 3
    with open(isolated_cwd / "sweep.csv", newline="") as handle:
        table = list(csv.reader(handle))
    assert tuple(table[0]) == SWEEP_COLUMNS
    assert len(table) == 4
    assert (isolated_cwd / "sweep.png").stat().st_size > 0


def test_cli_sweep_with_failing_row(isolated_cwd):
    assert main(["sweep", "diff-eq", "--axis", "lambda", "--values=-1,2", "--samples", "0"]) == 1


def test_cli_sweep_needs_axis_and_values(isolated_cwd):
    with pytest.raises(SystemExit) as info:
        main(["sweep"])
    assert info.value.code == 2

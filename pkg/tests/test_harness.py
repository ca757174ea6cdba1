"""Tests for the experiment harness, config layering, CSV output and CLI."""

import csv
import json

import numpy as np
import pytest

from fdeval.cli import main
from fdeval.errors import InvalidInput
from fdeval.harness import (
    CSV_HEADER,
    ExperimentConfig,
    build_config,
    load_config_file,
    run_experiment,
    write_reports,
    _run_lqr_cell,
)

SMALL = dict(methods=("kl",), n_list=(60,), reps=2)


def test_config_validation():
    with pytest.raises(InvalidInput):
        ExperimentConfig(methods=("nope",))
    with pytest.raises(InvalidInput):
        ExperimentConfig(reps=0)
    with pytest.raises(InvalidInput):
        ExperimentConfig(experiment="lqr", methods=("tvd_mc",))
    # tvd_mc is fine for the tabular experiment (fits are divergence-free)
    ExperimentConfig(experiment="tabular", methods=("tvd_mc",))


def test_small_sweep_and_csv(tmp_path):
    config = ExperimentConfig(output_path=str(tmp_path / "r.csv"), **SMALL)
    reports = run_experiment(config)
    assert len(reports) == 2
    assert all(r.method == "kl" and r.n == 60 and not r.failed for r in reports)
    path = write_reports(reports, config)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == CSV_HEADER
    assert len(rows) == 3
    meta = json.loads((tmp_path / "r.csv.meta.json").read_text())
    assert meta["config"]["master_seed"] == 0
    assert meta["t_selection"]["c_divide"] == 5.0


def test_sweep_rerun_is_byte_identical(tmp_path):
    config = ExperimentConfig(output_path=str(tmp_path / "a.csv"), **SMALL)
    write_reports(run_experiment(config), config)
    config2 = ExperimentConfig(output_path=str(tmp_path / "b.csv"), **SMALL)
    write_reports(run_experiment(config2), config2)

    def strip_runtime(path):
        with open(path) as fh:
            return [row[:6] + row[7:] for row in csv.reader(fh)]

    assert strip_runtime(tmp_path / "a.csv") == strip_runtime(tmp_path / "b.csv")


def test_datasets_are_method_invariant():
    """Two methods on the same (rep, n) see identical data, so their seeds
    match and a pure-mean criterion evaluates both on the same draw."""
    c1 = ExperimentConfig(methods=("kl",), n_list=(60,), reps=1)
    c2 = ExperimentConfig(methods=("pdf_l2", "kl"), n_list=(60,), reps=1)
    r1 = run_experiment(c1)[0]
    r2 = [r for r in run_experiment(c2) if r.method == "kl"][0]
    assert r1.seed == r2.seed
    assert r1.inaccuracy == pytest.approx(r2.inaccuracy, abs=1e-12)


def test_tabular_cells_ignore_method_label():
    config = ExperimentConfig(
        experiment="tabular", methods=("kl", "energy"), n_list=(200,), reps=1,
        dpi_points=100,
    )
    reports = run_experiment(config)
    assert reports[0].inaccuracy == pytest.approx(reports[1].inaccuracy, abs=1e-12)


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "exp.ini"
    cfg.write_text(
        "[experiment]\n"
        "kind = lqr\n"
        "methods = kl, pdf_l2\n"
        "n = 60\n"
        "reps = 3\n"
        "seed = 7\n"
        "[divergence]\n"
        "sigma_rbf = 2.5\n"
        "b = 4\n"
        "[t_selection]\n"
        "c_divide = 10\n"
        "[optimizer]\n"
        "max_evals = 500\n"
        "gradient_mode = analytic\n"
    )
    loaded = load_config_file(str(cfg))
    assert loaded["methods"] == ("kl", "pdf_l2")
    assert loaded["master_seed"] == 7
    config = build_config(str(cfg), reps=9, master_seed=None)
    assert config.reps == 9  # flag wins
    assert config.master_seed == 7  # None flags fall through to the file
    assert config.sigma_rbf == 2.5
    assert config.b_samples == 4
    assert config.t_params.c_divide == 10.0
    assert config.optimizer.max_evals == 500


def test_config_file_errors(tmp_path):
    with pytest.raises(InvalidInput):
        load_config_file(str(tmp_path / "missing.ini"))
    with pytest.raises(InvalidInput):
        build_config(None, not_a_field=3)


def test_failure_becomes_nan_row(monkeypatch, tmp_path):
    from fdeval import harness
    from fdeval.errors import OptimizationFailure

    def boom(*args, **kwargs):
        raise OptimizationFailure("forced", iteration=1)

    monkeypatch.setattr(harness, "fde_run", boom)
    config = ExperimentConfig(output_path=str(tmp_path / "f.csv"), **SMALL)
    reports = run_experiment(config)
    assert all(r.failed and np.isnan(r.inaccuracy) for r in reports)
    path = write_reports(reports, config)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[1][5] == "nan" and rows[1][7] == "1"


def test_cli_run_lqr_small(tmp_path, capsys):
    out = tmp_path / "cli.csv"
    code = main([
        "run-lqr", "--methods", "kl", "--n", "60", "--reps", "1", "--out", str(out),
    ])
    assert code == 0
    assert out.exists() and (tmp_path / "cli.csv.meta.json").exists()
    assert "wrote 1 rows" in capsys.readouterr().out


def test_cli_rejects_tvd_on_lqr(capsys):
    code = main(["run-lqr", "--methods", "tvd_mc", "--n", "60", "--reps", "1"])
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_cli_check_exit_codes(capsys):
    assert main(["check", "--suite", "sandwich", "--seed", "0"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["passed"] is True
    assert main(["check", "--suite", "no_such_suite"]) == 1


def test_cli_truth_lqr(capsys):
    assert main(["truth-lqr"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["m3"][0][0] == pytest.approx(2.6485, abs=1e-3)
    assert payload["return_variance"] == pytest.approx(50.2513, abs=1e-3)


def test_runtime_ms_recorded():
    report = _run_lqr_cell(ExperimentConfig(**SMALL), "kl", 60, 0)
    assert report.runtime_ms > 0
    assert report.t_used >= 1

import csv
import json

import numpy as np
import pytest

from rlmc.cli import main, read_coefficients, resolve_config
from rlmc.exceptions import ConfigurationError


def run_cli(tmp_path, name, command, config=None, *flags):
    out = tmp_path / name
    args = [command, "--out", str(out), *flags]
    if config is not None:
        path = tmp_path / f"{name}.json"
        path.write_text(json.dumps(config))
        args += ["--config", str(path)]
    return main(args), out


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_zero_problem_solve(tmp_path):
    code, out = run_cli(tmp_path, "zero", "solve", {"problem": {"name": "zero"}, "budgets": {"M": 50}}, "--seed", "1")
    assert code == 0
    rows = read_rows(out / "coefficients.csv")
    assert rows[0] == ["solver", "n", "alpha_1", "alpha_2", "alpha_3"]
    assert len(rows) == 1 + 2 * 5
    assert all(float(v) == 0.0 for r in rows[1:] for v in r[2:])


def test_manifest_lists_every_file(tmp_path):
    code, out = run_cli(tmp_path, "m", "solve", {"problem": {"name": "zero"}, "budgets": {"M": 20}}, "--seed", "1")
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    written = {str(p.relative_to(out)) for p in out.rglob("*") if p.is_file()} - {"manifest.json"}
    assert set(manifest["files"]) == written
    assert manifest["status"] == "ok"
    cfg = json.loads((out / "config.json").read_text())
    assert cfg["seed"] == 1 and cfg["backend"] in ("compiled", "python")


def test_diagnose_hilbert(tmp_path):
    config = {"problem": {"name": "two_period"},
              "basis": {"kind": "monomial", "parameters": {"degree": 5, "domain": [[0.0], [1.0]]}},
              "measure": {"kind": "uniform_box", "box": {"lo": [0.0], "hi": [1.0]}}}
    code, out = run_cli(tmp_path, "diag", "diagnose", config, "--seed", "0")
    assert code == 0
    report = json.loads((out / "diagnose.json").read_text())
    assert report["gram"]["min_eigenvalue"] < 1e-6
    gram = np.array([[float(v) for v in r] for r in read_rows(out / "gram.csv")[1:]])
    i = np.arange(1, 7)
    np.testing.assert_allclose(gram[:, -6:], 1.0 / (i[:, None] + i[None, :] - 1), rtol=1e-12)


def test_unknown_measure_field_is_reported(tmp_path):
    config = {"problem": {"name": "zero"}, "measure": {"kind": "uniform_box", "lo": [0.0]}}
    code, out = run_cli(tmp_path, "badmu", "diagnose", config, "--seed", "0")
    assert code == 2
    assert json.loads((out / "error.json").read_text())["errors"] == ["measure.lo: unknown field"]


def test_missing_seed_is_a_configuration_error(tmp_path, capsys):
    code, out = run_cli(tmp_path, "noseed", "solve", {"problem": {"name": "zero"}})
    assert code == 2
    err = json.loads((out / "error.json").read_text())
    assert err["kind"] == "configuration"
    assert any(e.startswith("seed") for e in err["errors"])


def test_every_config_error_is_listed():
    raw = {"colour": 1, "solver": "magic", "budgets": {"M": 0, "eval_paths": -1, "gamma": -2.0,
                                                       "optimizer": {"grid": 1, "refine_steps": -1, "shrink": 1}}}
    with pytest.raises(ConfigurationError) as exc:
        resolve_config("evaluate", raw, seed=None, out=None, threads=0)
    fields = {e.split(":")[0] for e in exc.value.errors}
    assert fields == {"colour", "seed", "out", "threads", "solver", "budgets.M", "budgets.eval_paths",
                      "budgets.gamma", "budgets.optimizer.grid", "budgets.optimizer.refine_steps",
                      "budgets.optimizer.shrink", "coefficients"}


def test_unknown_problem_parameter(tmp_path):
    code, out = run_cli(tmp_path, "bad", "solve", {"problem": {"name": "lq1", "overrides": {"NN": 3}}}, "--seed", "1")
    assert code == 2
    assert "problem.overrides.NN" in json.loads((out / "error.json").read_text())["errors"][0]


def test_solve_then_evaluate(tmp_path):
    config = {"problem": {"name": "lq1", "overrides": {"N": 10}}, "budgets": {"M": 500, "eval_paths": 400},
              "solver": "value"}
    code, out = run_cli(tmp_path, "s", "solve", config, "--seed", "4")
    assert code == 0
    coeffs = read_coefficients(out / "coefficients.csv")
    assert coeffs.alpha.shape == (10, 3)
    config["coefficients"] = str(out / "coefficients.csv")
    config["x0"] = [0.5]
    code, out2 = run_cli(tmp_path, "e", "evaluate", config, "--seed", "4")
    assert code == 0
    report = json.loads((out2 / "eval_report.json").read_text())
    assert report["paths"] == 400 and report["x0"] == [0.5]
    hist = read_rows(out2 / "histogram.csv")
    assert sum(int(r[2]) for r in hist[1:]) == 400
    assert len(read_rows(out2 / "curves" / "cross_sections.csv")) == 12


def test_evaluate_rejects_mismatched_coefficients(tmp_path):
    config = {"problem": {"name": "zero"}, "budgets": {"M": 20}, "solver": "value"}
    _, out = run_cli(tmp_path, "z", "solve", config, "--seed", "1")
    config.update(problem={"name": "lq1", "overrides": {"N": 10}}, coefficients=str(out / "coefficients.csv"))
    code, _ = run_cli(tmp_path, "ze", "evaluate", config, "--seed", "1")
    assert code == 2


def test_thread_count_does_not_change_outputs(tmp_path):
    config = {"problem": {"name": "lq1"}, "budgets": {"M": 2000}, "solver": "value"}
    outs = []
    for threads in ("1", "3"):
        code, out = run_cli(tmp_path, f"t{threads}", "solve", config, "--seed", "11", "--threads", threads)
        assert code == 0
        outs.append((out / "coefficients.csv").read_bytes())
    assert outs[0] == outs[1]


def test_bench_lq_error_curve_shape(tmp_path):
    # reduced budgets; the full-budget run is part of the acceptance suite
    config = {"budgets": {"M": 1000, "eval_paths": 200}}
    code, out = run_cli(tmp_path, "lq", "bench-lq", config, "--seed", "5")
    assert code == 0
    rows = read_rows(out / "error_curve.csv")
    assert rows[0] == ["x0", "reference", "value_mean", "value_se", "value_rel_error",
                       "performance_mean", "performance_se", "performance_rel_error"]
    assert len(rows) == 22
    assert all(np.isfinite(float(v)) for r in rows[1:] for v in r)


def test_measure_tradeoff_outputs(tmp_path):
    code, out = run_cli(tmp_path, "mt", "measure-tradeoff", {"r_bar_grid": {}}, "--seed", "0")
    assert code == 0
    rows = read_rows(out / "tradeoff.csv")
    assert rows[0][:3] == ["sigma", "epsilon_3", "r_bar"] and len(rows) == 6
    assert rows[-1][2] == "inf"
    assert len(read_rows(out / "curves" / "cost_curves.csv")) == 122


def test_module_entry_point():
    import subprocess
    import sys

    res = subprocess.run([sys.executable, "-m", "rlmc", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip() == "0.1.0"

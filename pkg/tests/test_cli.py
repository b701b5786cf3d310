import json
import logging

import pandas as pd
import pytest

from permfit import main as cli
from permfit.core.reporting import load_manifest, load_outcome, load_sweep, manifest_path


@pytest.fixture(autouse=True)
def _drop_log_handlers():
    yield
    root = logging.getLogger()
    for handler in cli._installed_handlers:
        root.removeHandler(handler)
    cli._installed_handlers.clear()


@pytest.fixture
def run(tmp_path):
    """Runs the CLI with a configuration file that does not exist (defaults apply)."""
    config = str(tmp_path / "absent.yaml")

    def _run(*argv):
        return cli.main(["--config", config, *[str(a) for a in argv]])
    return _run


@pytest.fixture
def dataset(run, tmp_path):
    path = tmp_path / "data.csv"
    assert run("simulate", "--scenario", "bivariate_normal", "--n", 30, "--rho", 0.8, "--seed", 3,
               "--out", path) == 0
    return path


def test_simulate_writes_predictors_and_response(dataset):
    frame = pd.read_csv(dataset)
    assert list(frame.columns) == ["x1", "y"]
    assert len(frame) == 30


def test_simulate_is_reproducible(run, dataset, tmp_path):
    again = tmp_path / "again.csv"
    run("simulate", "--scenario", "bivariate_normal", "--n", 30, "--rho", 0.8, "--seed", 3, "--out", again)
    assert again.read_bytes() == dataset.read_bytes()


def test_test_writes_outcome_and_manifest(run, dataset, tmp_path, capsys):
    out = tmp_path / "outcome.json"
    assert run("test", dataset, "--response", "y", "--permutations", 50, "--seed", 11, "--out", out) == 0
    outcome = load_outcome(str(out))
    assert outcome.n_reference == 50
    assert outcome.reject
    assert "reject H0" in capsys.readouterr().out

    manifest = load_manifest(manifest_path(str(out)))
    assert manifest.master_seed == 11
    assert str(dataset) in manifest.inputs
    assert str(out) in manifest.outputs


def test_output_is_independent_of_thread_count(run, dataset, tmp_path):
    single, pooled = tmp_path / "one.json", tmp_path / "three.json"
    run("test", dataset, "--response", "y", "--permutations", 40, "--threads", 1, "--out", single)
    run("test", dataset, "--response", "y", "--permutations", 40, "--threads", 3, "--out", pooled)
    assert single.read_bytes() == pooled.read_bytes()


def test_several_outputs_in_one_run(run, dataset, tmp_path):
    paths = [tmp_path / "o.json", tmp_path / "o.csv", tmp_path / "o.svg"]
    argv = ["test", dataset, "--response", "y", "--permutations", 30]
    for path in paths:
        argv += ["--out", path]
    assert run(*argv) == 0
    assert all(path.exists() for path in paths)
    assert len(pd.read_csv(paths[1])) == 30


def test_replay_reproduces_outputs(run, dataset, tmp_path, capsys):
    out = tmp_path / "outcome.json"
    run("test", dataset, "--response", "y", "--permutations", 30, "--out", out)
    assert run("replay", manifest_path(str(out))) == 0
    assert "Reproduced 1 output(s)" in capsys.readouterr().out


def test_replay_detects_changed_input(run, dataset, tmp_path):
    out = tmp_path / "outcome.json"
    run("test", dataset, "--response", "y", "--permutations", 30, "--out", out)
    dataset.write_text(dataset.read_text(encoding="utf-8") + "0.5,0.5\n", encoding="utf-8")
    assert run("replay", manifest_path(str(out))) == 2


def test_usage_errors_exit_one(run, dataset, tmp_path):
    assert run("test", dataset, "--permutations", 10) == 1
    assert run("test", dataset, "--response", "y", "--model", "svm") == 1
    assert run("test", dataset, "--response", "y", "--alpha", 1.5) == 1
    assert run("test", dataset, "--response", "y", "--out", tmp_path / "outcome.png") == 1
    assert run("compare", "--scenario", "null_uniform", "--axis", "n", "--tests", "pearson") == 1


def test_runtime_errors_exit_two(run, dataset, tmp_path):
    assert run("test", tmp_path / "missing.csv", "--response", "y") == 2
    assert run("test", dataset, "--response", "z") == 2
    bad = tmp_path / "bad.csv"
    bad.write_text("x1,y\nabc,1\n2,3\n", encoding="utf-8")
    assert run("test", bad, "--response", "y") == 2


def test_invalid_config_file_exits_one(dataset, tmp_path):
    config = tmp_path / "config.yaml"
    config.write_text("n_permutations: -5\n", encoding="utf-8")
    assert cli.main(["--config", str(config), "test", str(dataset), "--response", "y"]) == 1


def test_config_file_is_used_and_recorded(dataset, tmp_path):
    config = tmp_path / "config.yaml"
    config.write_text("n_permutations: 25\nmaster_seed: 9\n", encoding="utf-8")
    out = tmp_path / "outcome.json"
    assert cli.main(["--config", str(config), "test", str(dataset), "--response", "y", "--out", str(out)]) == 0
    assert load_outcome(str(out)).n_reference == 25
    assert str(config) in load_manifest(manifest_path(str(out))).inputs


def test_report_rerenders_outcome(run, dataset, tmp_path, capsys):
    out = tmp_path / "outcome.json"
    run("test", dataset, "--response", "y", "--permutations", 30, "--out", out)
    capsys.readouterr()
    svg = tmp_path / "histogram.svg"
    assert run("report", out, "--out", svg) == 0
    assert svg.read_text(encoding="utf-8").count('id="marker-') == 2
    assert "H0" in capsys.readouterr().out


def test_sweep_and_report(run, tmp_path, capsys):
    out = tmp_path / "sweep.json"
    scatter = tmp_path / "scatter.svg"
    assert run("sweep", "--scenario", "bivariate_normal", "--n", 20, "--axis", "rho", "--grid", "0,0.9",
               "--replications", 3, "--permutations", 20, "--out", out, "--scatter", scatter) == 0
    results = load_sweep(str(out))
    assert results[0].grid == (0.0, 0.9)
    assert results[0].replications == 3
    assert scatter.exists()
    assert capsys.readouterr().out.startswith("r2/OLS")

    csv = tmp_path / "rates.csv"
    assert run("report", out, "--out", csv) == 0
    assert list(pd.read_csv(csv, float_precision="round_trip")["grid_value"]) == [0.0, 0.9]


def test_sweep_output_is_independent_of_thread_count(run, tmp_path):
    outputs = []
    for threads in (1, 4):
        out = tmp_path / f"sweep{threads}.json"
        run("sweep", "--scenario", "null_uniform", "--n", 15, "--axis", "n", "--grid", "10,15",
            "--replications", 4, "--permutations", 15, "--threads", threads, "--out", out)
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1]


def test_compare_runs_every_test_on_the_same_replicates(run, tmp_path):
    out = tmp_path / "compare.json"
    assert run("compare", "--scenario", "bivariate_normal", "--n", 20, "--axis", "rho", "--grid", "0.5",
               "--replications", 3, "--permutations", 20,
               "--tests", "r2/ols", "tstar", "spearman:1", "kendall:1", "--out", out) == 0
    payload = json.loads(out.read_text(encoding="utf-8"))
    assert len(payload["results"]) == 4
    assert payload["config"]["tests"] == [result["label"] for result in payload["results"]]
    assert {result["replications"] for result in payload["results"]} == {3}


def test_demo(run, tmp_path, capsys):
    out = tmp_path / "demo.json"
    assert run("demo", "--model", "ols", "--permutations", 50, "--out", out) == 0
    printed = capsys.readouterr().out
    assert "permuted fits scored higher than the original pairing" in printed
    assert load_outcome(str(out)).n_reference == 50


def test_version(capsys):
    with pytest.raises(SystemExit):
        cli.build_parser().parse_args(["--version"])
    assert "permfit" in capsys.readouterr().out


def test_compare_rank_column_outside_the_dataset(run, tmp_path):
    argv = ["compare", "--scenario", "bivariate_normal", "--n", 20, "--axis", "rho", "--grid", "0.5",
            "--replications", 2, "--permutations", 10, "--out", tmp_path / "compare.json"]
    assert run(*argv, "--tests", "spearman:3") == 2
    assert run(*argv, "--tests", "kendall:first") == 1


def test_compare_prints_quantiles_per_model_class(run, tmp_path, capsys):
    assert run("compare", "--scenario", "null_uniform", "--n", 20, "--axis", "n", "--grid", "20",
               "--replications", 2, "--permutations", 20, "--tests", "r2/ols", "abs-risk/ols",
               "--out", tmp_path / "compare.json") == 0
    lines = capsys.readouterr().out.splitlines()
    header = lines.index("mean 95% quantile of the permutation reference:")
    assert [line.split(":")[0] for line in lines[header + 1:]] == ["r2/OLS", "abs-risk/OLS"]


def test_numeric_value_error_is_a_runtime_failure(run, dataset, monkeypatch):
    def broken(*args, **kwargs):
        raise ValueError("array must not contain infs or NaNs")

    monkeypatch.setattr(cli, "run_permutation_test", broken)
    assert run("test", dataset, "--response", "y") == 2

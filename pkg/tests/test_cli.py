import csv
import json
from pathlib import Path

import numpy as np
import pytest

from monoord.cli import main
from monoord import dataio, diagnostics
from monoord.dataio import DataSchema, RunManifest, read_records
from monoord.likelihood import LinkSpec, ModelSpec


def run(*argv):
    return main(list(argv))


def read_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [row for row in reader]
    return header, rows


FIT_CONFIG = """
[model]
categories = 5
link = identity

[sampler]
iterations = 800
burn_in = 200
thin = 20
seed = 3

[data]
path = {data}
response = y
monotone = x1 x2
ecdf = false
"""


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    code = run(
        "simulate", "--family", "linear", "--n", "300", "--seed", "7",
        "--out", str(out),
    )
    assert code == 0
    return out


@pytest.fixture(scope="module")
def fit_dir(tmp_path_factory, sim_dir):
    out = tmp_path_factory.mktemp("fit")
    cfg = out / "run.ini"
    cfg.write_text(FIT_CONFIG.format(data=sim_dir / "dataset.csv"))
    assert run("fit", "--config", str(cfg), "--out", str(out)) == 0
    return out


def test_simulate_outputs(sim_dir):
    header, rows = read_csv(sim_dir / "dataset.csv")
    assert header == ["x1", "x2", "y"]
    assert len(rows) == 300
    header, rows = read_csv(sim_dir / "truth_probs.csv")
    assert header == ["p1", "p2", "p3", "p4", "p5"]
    probs = np.array([[float(v) for v in row] for row in rows])
    assert np.allclose(probs.sum(axis=1), 1.0)
    header, rows = read_csv(sim_dir / "truth_grid.csv")
    assert header[:2] == ["x1", "x2"]
    assert len(rows) == 51 * 51


def test_fit_outputs(fit_dir):
    manifest = RunManifest.read(fit_dir / "manifest.json")
    assert manifest.command == "fit"
    records = read_records(fit_dir / "samples_00.ndjson")
    assert len(records) == 800 // 20
    header, rows = read_csv(fit_dir / "trace.csv")
    assert header[:4] == ["chain", "iteration", "loglik", "total_points"]
    assert len(rows) == len(records)


def test_fit_equals_in_process_api(sim_dir, fit_dir):
    # the CLI pipeline must produce exactly what the library produces
    from monoord.sampler import SamplerConfig, collect_chain

    schema = DataSchema(
        response="y", n_categories=5, monotone=("x1", "x2"), apply_ecdf=False
    )
    loaded = dataio.load_dataset(sim_dir / "dataset.csv", schema)
    model = ModelSpec(n_categories=5, n_covariates=2, link=LinkSpec.identity())
    cfg = SamplerConfig(iterations=800, burn_in=200, thin=20, seed=3)
    records = collect_chain(loaded.dataset, model, cfg)
    stored = read_records(fit_dir / "samples_00.ndjson")
    assert len(records) == len(stored)
    for a, b in zip(records, stored):
        assert a.iteration == b.iteration
        assert a.loglik == b.loglik
        assert np.array_equal(a.counts, b.counts)


def test_fit_determinism_byte_identical(sim_dir, tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text(FIT_CONFIG.format(data=sim_dir / "dataset.csv"))
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    assert run("fit", "--config", str(cfg), "--out", str(out1)) == 0
    assert run("fit", "--config", str(cfg), "--out", str(out2)) == 0
    b1 = (out1 / "samples_00.ndjson").read_bytes()
    b2 = (out2 / "samples_00.ndjson").read_bytes()
    assert b1 == b2


def test_fit_rerun_from_manifest(fit_dir, tmp_path):
    out = tmp_path / "redo"
    assert run("fit", "--manifest", str(fit_dir / "manifest.json"),
               "--out", str(out)) == 0
    assert (out / "samples_00.ndjson").read_bytes() == (
        fit_dir / "samples_00.ndjson"
    ).read_bytes()


def test_diag_outputs(sim_dir, fit_dir, tmp_path):
    out = tmp_path / "diag"
    code = run(
        "diag", "--run", str(fit_dir), "--data", str(sim_dir / "dataset.csv"),
        "--truth", str(sim_dir / "truth_probs.csv"), "--out", str(out),
    )
    assert code == 0
    header, rows = read_csv(out / "mae.csv")
    metrics = {row[0]: float(row[1]) for row in rows}
    assert "mae_overall" in metrics
    assert 0 <= metrics["mae_overall"] <= 1
    header, rows = read_csv(out / "inclusion.csv")
    assert header == ["covariate", "inclusion_probability", "mean_point_count"]
    assert len(rows) == 2


def test_diag_matches_in_process(sim_dir, fit_dir, tmp_path):
    out = tmp_path / "diag2"
    run(
        "diag", "--run", str(fit_dir), "--data", str(sim_dir / "dataset.csv"),
        "--truth", str(sim_dir / "truth_probs.csv"), "--out", str(out),
    )
    _, rows = read_csv(out / "mae.csv")
    metrics = {row[0]: float(row[1]) for row in rows}

    from monoord.simulate import ScenarioSpec, TruthOracle

    schema = DataSchema(
        response="y", n_categories=5, monotone=("x1", "x2"), apply_ecdf=False
    )
    loaded = dataio.load_dataset(sim_dir / "dataset.csv", schema)
    model = ModelSpec(n_categories=5, n_covariates=2, link=LinkSpec.identity())
    records = read_records(fit_dir / "samples_00.ndjson")
    oracle = TruthOracle("linear", "nonparametric")
    want = diagnostics.mae_overall(records, oracle, loaded.dataset, model)
    assert metrics["mae_overall"] == pytest.approx(want, abs=1e-9)


def test_predict_surface(fit_dir, tmp_path):
    out = tmp_path / "pred"
    assert run("predict", "--run", str(fit_dir), "--k", "2", "--grid", "11",
               "--out", str(out)) == 0
    header, rows = read_csv(out / "surface_k2.csv")
    assert header == ["x1", "x2", "mean_survival"]
    assert len(rows) == 121
    vals = np.array([float(r[2]) for r in rows]).reshape(11, 11)
    assert np.all(np.diff(vals, axis=0) >= -1e-12)
    assert np.all(np.diff(vals, axis=1) >= -1e-12)


def test_prior_check_command(tmp_path):
    out = tmp_path / "prior"
    code = run(
        "prior-check", "--p", "2", "--iterations", "20000", "--thin", "40",
        "--seed", "1", "--out", str(out),
    )
    assert code == 0
    header, rows = read_csv(out / "prior_summary.csv")
    assert len(rows) == 3
    means = [float(r[1]) for r in rows]
    assert all(0.2 < m < 3.5 for m in means)


def test_baseline_command(sim_dir, tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text(FIT_CONFIG.format(data=sim_dir / "dataset.csv"))
    out = tmp_path / "base"
    code = run(
        "baseline", "--config", str(cfg), "--iterations", "400",
        "--burn-in", "100", "--out", str(out),
    )
    assert code == 0
    header, rows = read_csv(out / "baseline_samples.csv")
    assert header[:4] == ["alpha_2", "alpha_3", "alpha_4", "alpha_5"]
    alphas = np.array([[float(v) for v in row[:4]] for row in rows])
    assert np.all(np.diff(alphas, axis=1) < 0)


def test_exit_codes(tmp_path):
    assert run("fit") == 1  # missing --config / --manifest
    assert run("nonsense") == 1  # unknown command
    missing = tmp_path / "run.ini"
    missing.write_text("[model]\ncategories = 5\n\n[data]\npath = gone.csv\n"
                       "response = y\nmonotone = x1\n\n[sampler]\niterations=10\n")
    assert run("fit", "--config", str(missing)) == 2  # unreadable data
    assert run("diag", "--run", str(tmp_path / "nope"), "--data", "x",
               "--truth", "y") == 2


def test_fit_multiple_chains(sim_dir, tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text(FIT_CONFIG.format(data=sim_dir / "dataset.csv"))
    out = tmp_path / "chains"
    assert run("fit", "--config", str(cfg), "--chains", "2",
               "--out", str(out)) == 0
    a = read_records(out / "samples_00.ndjson")
    b = read_records(out / "samples_01.ndjson")
    assert len(a) == len(b) == 800 // 20
    # chains use distinct derived seeds
    assert any(ra.loglik != rb.loglik for ra, rb in zip(a, b))
    manifest = RunManifest.read(out / "manifest.json")
    assert manifest.outputs["samples"] == [
        "samples_00.ndjson", "samples_01.ndjson"
    ]


def test_env_var_default_out(sim_dir, monkeypatch, tmp_path):
    target = tmp_path / "envout"
    monkeypatch.setenv("MONOORD_OUT", str(target))
    code = run("simulate", "--family", "linear", "--n", "50", "--seed", "1")
    assert code == 0
    assert (target / "dataset.csv").exists()

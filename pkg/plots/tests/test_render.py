import csv
import subprocess
import sys
from pathlib import Path

import pytest

from monoord_plots import PlotJob, SchemaError, render
from monoord_plots.cli import main as plots_main


def monoord(*args):
    """Drive the fitting package through its public command line."""
    proc = subprocess.run(
        [sys.executable, "-m", "monoord.cli", *map(str, args)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    return proc


FIT_CONFIG = """
[model]
categories = 5
link = logit
range = -4 4

[sampler]
iterations = 1500
burn_in = 300
thin = 30
seed = {seed}

[data]
path = {data}
response = y
monotone = x1 x2
ecdf = false
"""


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    """A completed desk-scale run: simulate, fit, predict, diag, baseline."""
    root = tmp_path_factory.mktemp("desk")
    sim = root / "sim"
    monoord("simulate", "--family", "continuous", "--n", "300", "--seed", "5",
            "--out", sim)

    fits = []
    for seed in (1, 2):
        fit = root / f"fit{seed}"
        cfg = root / f"run{seed}.ini"
        cfg.write_text(FIT_CONFIG.format(seed=seed, data=sim / "dataset.csv"))
        monoord("fit", "--config", cfg, "--out", fit)
        fits.append(fit)

    for k in (2, 3, 4):
        monoord("predict", "--run", fits[0], "--k", k, "--grid", "21",
                "--out", fits[0])
    monoord("predict", "--run", fits[0], "--kind", "standardized",
            "--covariate", "0", "--k", "2", "--grid", "25",
            "--data", sim / "dataset.csv", "--out", fits[0])
    monoord("predict", "--run", fits[0], "--kind", "standardized",
            "--covariate", "1", "--k", "2", "--grid", "25",
            "--data", sim / "dataset.csv", "--out", fits[0])

    for i, fit in enumerate(fits):
        monoord("diag", "--run", fit, "--data", sim / "dataset.csv",
                "--truth", sim / "truth_probs.csv", "--out", root / f"diag{i}")

    base = root / "baseline"
    monoord("baseline", "--config", root / "run1.ini", "--iterations", "600",
            "--burn-in", "150", "--out", base)

    # replicate-by-category error table assembled from the diag outputs
    rows = []
    for i in range(len(fits)):
        with (root / f"diag{i}" / "mae.csv").open(newline="") as fh:
            metrics = {r[0]: float(r[1]) for r in list(csv.reader(fh))[1:]}
        rows.append([metrics[f"mae_{k}"] for k in range(1, 6)])
    table = root / "mae_table.csv"
    with table.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"mae_{k}" for k in range(1, 6)])
        writer.writerows(rows)
    return root


def surfaces(run_dir):
    return [str(run_dir / "fit1" / f"surface_k{k}.csv") for k in (2, 3, 4)]


def render_twice(job_kind, inputs, out_dir, labels=None):
    paths = []
    for tag in ("a", "b"):
        out = out_dir / f"{job_kind}-{tag}.svg"
        job = PlotJob(kind=job_kind, inputs=tuple(map(str, inputs)),
                      output=str(out), labels=labels or {})
        render(job)
        paths.append(out)
    b0, b1 = paths[0].read_bytes(), paths[1].read_bytes()
    assert b0 == b1, f"{job_kind}: output not byte-stable"
    assert b0.startswith(b"<?xml")
    assert b"dc:date" not in b0  # timestamps disabled
    return paths[0]


def test_surface_grid_renders(run_dir, tmp_path):
    render_twice("surface-grid", surfaces(run_dir), tmp_path)


def test_perspective_renders(run_dir, tmp_path):
    render_twice("perspective", surfaces(run_dir), tmp_path)


def test_conditional_renders(run_dir, tmp_path):
    inputs = [
        run_dir / "fit1" / "standardized_x0_k2.csv",
        run_dir / "fit1" / "standardized_x1_k2.csv",
    ]
    render_twice("conditional", inputs, tmp_path)


def test_loglik_density_renders(run_dir, tmp_path):
    inputs = [
        run_dir / "fit1" / "trace.csv",
        run_dir / "baseline" / "baseline_samples.csv",
    ]
    render_twice("loglik-density", inputs, tmp_path,
                 labels={"names": ["monotonic", "proportional odds"]})


def test_mae_box_renders(run_dir, tmp_path):
    render_twice("mae-box", [run_dir / "mae_table.csv"], tmp_path)


def test_cli_end_to_end(run_dir, tmp_path):
    out = tmp_path / "fig.svg"
    code = plots_main([
        "--kind", "surface-grid",
        "--input", *surfaces(run_dir),
        "--out", str(out),
        "--title", "desk run",
    ])
    assert code == 0
    assert out.exists()


def test_schema_mismatch_fails_fast(run_dir, tmp_path):
    bogus = tmp_path / "bogus.csv"
    bogus.write_text("a,b\n1,2\n")
    job = PlotJob(kind="surface-grid", inputs=(str(bogus),),
                  output=str(tmp_path / "x.svg"))
    with pytest.raises(SchemaError, match="missing columns"):
        render(job)


def test_cli_reports_input_errors(tmp_path):
    code = plots_main([
        "--kind", "mae-box",
        "--input", str(tmp_path / "missing.csv"),
        "--out", str(tmp_path / "x.svg"),
    ])
    assert code == 2


def test_unknown_kind_rejected(tmp_path):
    with pytest.raises(SchemaError):
        PlotJob(kind="pie", inputs=("x.csv",), output="y.svg")


def test_inputs_never_mutated(run_dir, tmp_path):
    table = run_dir / "mae_table.csv"
    before = table.read_bytes()
    render_twice("mae-box", [table], tmp_path)
    assert table.read_bytes() == before

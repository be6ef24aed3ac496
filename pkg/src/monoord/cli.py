"""Command-line entry points.

Subcommands: simulate | fit | prior-check | predict | diag | baseline.
Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime failure.
The MONOORD_OUT environment variable supplies the default output directory.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from pathlib import Path

import numpy as np

from . import dataio, diagnostics, simulate
from .dataio import DataError, DataSchema, RunManifest
from .geometry import InvariantViolation
from .likelihood import LinkSpec, ModelSpec
from .sampler import SamplerConfig, run_chain
from .simulate import ScenarioSpec, make_scenario


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _out_dir(args) -> Path:
    out = args.out or os.environ.get("MONOORD_OUT") or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _add_run_flags(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--burn-in", type=int, default=None, dest="burn_in")
    p.add_argument("--thin", type=int, default=None)
    p.add_argument("--out", default=None)


def build_parser() -> _Parser:
    parser = _Parser(prog="monoord", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic scenario dataset")
    p.add_argument("--family", choices=simulate.FAMILIES, required=True)
    p.add_argument("--mode", choices=simulate.MODES, default="nonparametric")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid", type=int, default=51, help="truth grid resolution")
    p.add_argument("--out", default=None)

    p = sub.add_parser("fit", help="run the sampler on a dataset")
    p.add_argument("--config", help="INI run configuration")
    p.add_argument("--manifest", help="re-run from a stored manifest")
    p.add_argument("--chains", type=int, default=1)
    _add_run_flags(p)

    p = sub.add_parser("prior-check", help="run chains against a flat likelihood")
    p.add_argument("--p", type=int, default=2, help="covariate count")
    p.add_argument("--a", type=float, default=0.1)
    p.add_argument("--b", type=float, default=0.1)
    p.add_argument("--categories", type=int, default=5)
    _add_run_flags(p)
    p.set_defaults(iterations=200_000, thin=100, burn_in=0, seed=0)

    p = sub.add_parser("predict", help="posterior surfaces from stored samples")
    p.add_argument("--run", required=True, help="fit output directory")
    p.add_argument(
        "--kind", choices=("surface", "standardized"), default="surface"
    )
    p.add_argument("--k", type=int, default=2, help="category level")
    p.add_argument("--grid", type=int, default=51)
    p.add_argument("--covariate", type=int, default=0, help="0-based, standardized kind")
    p.add_argument("--data", help="dataset CSV (needed for standardized)")
    p.add_argument("--out", default=None)

    p = sub.add_parser("diag", help="error metrics and selection summaries")
    p.add_argument("--run", required=True, help="fit output directory")
    p.add_argument("--data", required=True, help="dataset CSV")
    p.add_argument("--truth", required=True, help="per-observation truth CSV")
    p.add_argument("--out", default=None)

    p = sub.add_parser("baseline", help="proportional-odds reference fit")
    p.add_argument("--config", required=True, help="INI run configuration")
    _add_run_flags(p)
    return parser


# -- simulate -------------------------------------------------------------------


def _cmd_simulate(args) -> int:
    out = _out_dir(args)
    spec = ScenarioSpec(family=args.family, mode=args.mode, n=args.n, seed=args.seed)
    dataset, oracle = make_scenario(spec)

    header = ["x1", "x2"]
    cols = [dataset.X[:, 0], dataset.X[:, 1]]
    if dataset.Z is not None:
        for j in range(dataset.Z.shape[1]):
            header.append(f"z{j + 1}")
            cols.append(dataset.Z[:, j])
    header.append("y")
    cols.append(dataset.y)
    rows = zip(*[c.tolist() for c in cols])
    dataio.write_csv(out / "dataset.csv", header, rows)

    truth = oracle.category_probs(dataset.X, dataset.Z)
    dataio.write_csv(
        out / "truth_probs.csv",
        [f"p{k}" for k in range(1, simulate.N_CATEGORIES + 1)],
        (row.tolist() for row in truth),
    )

    grid = diagnostics.make_grid(args.grid)
    surv = oracle.survival(grid)  # truth surfaces ignore z by fixing it at 0
    dataio.write_csv(
        out / "truth_grid.csv",
        ["x1", "x2"] + [f"s{k}" for k in range(1, simulate.N_CATEGORIES + 1)],
        (
            grid[i].tolist() + surv[i].tolist()
            for i in range(grid.shape[0])
        ),
    )

    manifest = RunManifest(
        command="simulate",
        model={"family": spec.family, "mode": spec.mode, "n": spec.n},
        sampler={"seed": spec.seed},
        outputs={
            "dataset": "dataset.csv",
            "truth_probs": "truth_probs.csv",
            "truth_grid": "truth_grid.csv",
        },
        created=dataio.timestamp(),
    )
    manifest.write(out / "manifest.json")
    print(f"wrote {dataset.n} observations to {out / 'dataset.csv'}")
    return 0


# -- fit ------------------------------------------------------------------------


def _resolve_fit_inputs(args):
    if args.manifest:
        manifest = RunManifest.read(args.manifest)
        model = dataio.model_from_dict(manifest.model)
        sampler = dataio.sampler_from_dict(manifest.sampler)
        schema = DataSchema(**manifest.data["schema"])
        data_path = manifest.data["path"]
    elif args.config:
        model, sampler, schema, extras = dataio.read_config(args.config)
        if schema is None:
            raise DataError("fit config needs a [data] section")
        data_path = extras["data_path"]
        if not data_path:
            raise DataError("fit config needs data.path")
        base = Path(args.config).parent
        if not Path(data_path).is_absolute():
            data_path = str(base / data_path)
    else:
        raise UsageError("fit needs --config or --manifest")

    for field in ("seed", "iterations", "burn_in", "thin"):
        value = getattr(args, field, None)
        if value is not None:
            sampler = dataclasses.replace(sampler, **{field: value})
    return model, sampler, schema, data_path


def _run_one_chain(payload):
    model, sampler, dataset, path = payload
    records = run_chain(dataset, model, sampler)
    return dataio.write_records(path, records)


def _cmd_fit(args) -> int:
    model, sampler, schema, data_path = _resolve_fit_inputs(args)
    out = _out_dir(args)
    loaded = dataio.load_dataset(data_path, schema)
    dataset = loaded.dataset
    if dataset.n_clusters != model.n_clusters:
        model = dataclasses.replace(model, n_clusters=dataset.n_clusters)
    dataset.check_labels(model.n_categories)

    chain_jobs = []
    for c in range(args.chains):
        cfg = (
            sampler
            if args.chains == 1
            else dataclasses.replace(sampler, seed=_chain_seed(sampler.seed, c))
        )
        chain_jobs.append(
            (model, cfg, dataset, out / f"samples_{c:02d}.ndjson")
        )
    if args.chains == 1:
        totals = [_run_one_chain(chain_jobs[0])]
    else:
        # independent seeded streams, one file per chain, merged by manifest
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=min(args.chains, os.cpu_count() or 1)) as pool:
            totals = list(pool.map(_run_one_chain, chain_jobs))

    manifest = RunManifest(
        command="fit",
        model=dataio.model_to_dict(model),
        sampler=dataio.sampler_to_dict(sampler),
        data={"path": str(data_path), "schema": dataclasses.asdict(schema)},
        outputs={
            "samples": [f"samples_{c:02d}.ndjson" for c in range(args.chains)],
            "records_per_chain": totals,
        },
        created=dataio.timestamp(),
    )
    manifest.write(out / "manifest.json")

    _write_traces(out, args.chains)
    print(f"wrote {sum(totals)} records across {args.chains} chain(s) to {out}")
    return 0


def _chain_seed(seed: int, chain: int) -> int:
    # stable per-chain streams derived from the base seed
    ss = np.random.SeedSequence([seed, chain])
    return int(ss.generate_state(1)[0])


def _write_traces(out: Path, chains: int):
    rows = []
    for c in range(chains):
        for record in dataio.iter_records(out / f"samples_{c:02d}.ndjson"):
            rows.append(
                [c, record.iteration, record.loglik, int(record.counts.sum())]
                + record.counts.tolist()
            )
    n_sub = len(rows[0]) - 4 if rows else 0
    dataio.write_csv(
        out / "trace.csv",
        ["chain", "iteration", "loglik", "total_points"]
        + [f"count_{i}" for i in range(n_sub)],
        rows,
    )


# -- prior-check ------------------------------------------------------------------


def _cmd_prior_check(args) -> int:
    out = _out_dir(args)
    model = ModelSpec(
        n_categories=args.categories,
        n_covariates=args.p,
        link=LinkSpec.identity(),
        a=args.a,
        b=args.b,
    )
    cfg = SamplerConfig(
        iterations=args.iterations,
        burn_in=args.burn_in or 0,
        thin=args.thin,
        seed=args.seed or 0,
    )
    counts = []
    rhos = []
    for record in run_chain(None, model, cfg):
        counts.append(record.counts)
        rhos.append(record.intensities)
    counts = np.array(counts)
    rhos = np.array(rhos)
    s = counts.shape[1]
    dataio.write_csv(
        out / "prior_counts.csv",
        [f"count_{i}" for i in range(s)] + [f"rho_{i}" for i in range(s)],
        (
            counts[i].tolist() + rhos[i].tolist()
            for i in range(counts.shape[0])
        ),
    )
    target_mean = args.a / args.b
    target_var = args.a / args.b**2 + args.a / args.b
    rows = []
    for i in range(s):
        rows.append(
            [
                i,
                float(counts[:, i].mean()),
                float(counts[:, i].var()),
                target_mean,
                target_var,
                float(rhos[:, i].mean()),
                float(rhos[:, i].var()),
            ]
        )
    dataio.write_csv(
        out / "prior_summary.csv",
        [
            "subspace",
            "count_mean",
            "count_var",
            "target_mean",
            "target_var",
            "rho_mean",
            "rho_var",
        ],
        rows,
    )
    print(f"prior-check: count means {counts.mean(axis=0).round(3).tolist()} "
          f"(target {target_mean})")
    return 0


# -- predict ----------------------------------------------------------------------


def _load_run(run_dir: str):
    run = Path(run_dir)
    manifest = RunManifest.read(run / "manifest.json")
    model = dataio.model_from_dict(manifest.model)
    sample_files = [run / name for name in manifest.outputs["samples"]]
    return manifest, model, sample_files


def _all_records(sample_files):
    for path in sample_files:
        yield from dataio.iter_records(path)


def _cmd_predict(args) -> int:
    out = _out_dir(args)
    manifest, model, sample_files = _load_run(args.run)
    if args.kind == "surface":
        if model.n_covariates != 2:
            raise DataError("surface prediction requires a 2-covariate model")
        grid = diagnostics.make_grid(args.grid, p=2)
        surface = diagnostics.posterior_mean_surface(
            _all_records(sample_files), grid, args.k, model
        )
        dataio.write_csv(
            out / f"surface_k{args.k}.csv",
            ["x1", "x2", "mean_survival"],
            (
                [grid[i, 0], grid[i, 1], float(surface[i])]
                for i in range(grid.shape[0])
            ),
        )
        print(f"wrote surface_k{args.k}.csv")
        return 0

    if not args.data:
        raise UsageError("standardized prediction needs --data")
    schema = DataSchema(**manifest.data["schema"])
    loaded = dataio.load_dataset(args.data, schema)
    grid_values = np.linspace(0.0, 1.0, args.grid)
    curve = diagnostics.standardized_function(
        _all_records(sample_files),
        loaded.dataset.X,
        args.covariate,
        grid_values,
        args.k,
        model,
    )
    dataio.write_csv(
        out / f"standardized_x{args.covariate}_k{args.k}.csv",
        ["x", "mean_survival"],
        ([float(g), float(v)] for g, v in zip(grid_values, curve)),
    )
    print(f"wrote standardized_x{args.covariate}_k{args.k}.csv")
    return 0


# -- diag -------------------------------------------------------------------------


def _read_truth_probs(path, n_categories: int) -> np.ndarray:
    import csv as _csv

    with Path(path).open(newline="") as fh:
        reader = _csv.reader(fh)
        header = next(reader)
        if header[: n_categories] != [f"p{k}" for k in range(1, n_categories + 1)]:
            raise DataError(f"{path} does not look like a truth-probability table")
        return np.array([[float(v) for v in row] for row in reader])


class _OracleFromTable:
    """Adapter exposing a stored per-observation truth table as an oracle."""

    def __init__(self, probs: np.ndarray):
        self._probs = probs

    def category_probs(self, X, Z=None) -> np.ndarray:
        return self._probs


def _cmd_diag(args) -> int:
    out = _out_dir(args)
    manifest, model, sample_files = _load_run(args.run)
    schema = DataSchema(**manifest.data["schema"])
    loaded = dataio.load_dataset(args.data, schema)
    dataset = loaded.dataset
    truth = _read_truth_probs(args.truth, model.n_categories)
    if truth.shape != (dataset.n, model.n_categories):
        raise DataError("truth table shape does not match the dataset")

    acc = diagnostics.MaeAccumulator(truth, dataset.y)
    records = list(_all_records(sample_files))
    for record in records:
        acc.add(diagnostics.record_category_probs(record, dataset, model))

    rows = [
        [f"mae_{k}", acc.mae_k(k)]
        for k in range(1, model.n_categories + 1)
        if np.any(dataset.y == k)
    ]
    rows.append(["mae_overall", acc.mae_overall()])
    dataio.write_csv(out / "mae.csv", ["metric", "value"], rows)

    sel_rows = []
    for j in range(model.n_covariates):
        sel_rows.append(
            [
                j,
                diagnostics.inclusion_probability(records, j),
                diagnostics.mean_point_count(records, j),
            ]
        )
    dataio.write_csv(
        out / "inclusion.csv",
        ["covariate", "inclusion_probability", "mean_point_count"],
        sel_rows,
    )
    print(f"wrote mae.csv and inclusion.csv to {out}")
    return 0


# -- baseline ---------------------------------------------------------------------


def _cmd_baseline(args) -> int:
    out = _out_dir(args)
    model, sampler, schema, extras = dataio.read_config(args.config)
    if schema is None:
        raise DataError("baseline config needs a [data] section")
    data_path = extras["data_path"]
    base = Path(args.config).parent
    if not Path(data_path).is_absolute():
        data_path = str(base / data_path)
    loaded = dataio.load_dataset(data_path, schema)
    for field in ("seed", "iterations", "burn_in", "thin"):
        value = getattr(args, field, None)
        if value is not None:
            sampler = dataclasses.replace(sampler, **{field: value})

    result = diagnostics.fit_po_baseline(
        loaded.dataset,
        sampler.iterations,
        sampler.seed,
        burn_in=sampler.burn_in,
        thin=sampler.thin,
        n_categories=model.n_categories,
    )
    K = model.n_categories
    header = [f"alpha_{k}" for k in range(2, K + 1)]
    header += [f"beta_{j}" for j in range(result.betas.shape[1])]
    header += ["loglik"]
    dataio.write_csv(
        out / "baseline_samples.csv",
        header,
        (
            result.alphas[i].tolist()
            + result.betas[i].tolist()
            + [float(result.loglik[i])]
            for i in range(result.loglik.size)
        ),
    )
    print(
        f"baseline acceptance: alpha {result.acceptance['alpha']:.3f}, "
        f"beta {result.acceptance['beta']:.3f}"
    )
    return 0


# -- driver -----------------------------------------------------------------------


_COMMANDS = {
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "prior-check": _cmd_prior_check,
    "predict": _cmd_predict,
    "diag": _cmd_diag,
    "baseline": _cmd_baseline,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except (InvariantViolation, ValueError, RuntimeError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

"""Dataset ingestion, covariate transforms, run manifests and sample streams.

Sample streams are newline-delimited JSON, one record per thinned draw, with
a header line carrying the format version.  All floats round-trip exactly
(shortest-repr encoding), so re-running a fit from its manifest reproduces
the stream byte for byte.
"""

from __future__ import annotations

import configparser
import csv
import json
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .likelihood import Dataset, LinkSpec, ModelSpec
from .sampler import SampleRecord, SamplerConfig

FORMAT_VERSION = 1
PACKAGE_VERSION = "0.1.0"


class DataError(ValueError):
    """Malformed input data or schema mismatch."""


# -- ECDF transform -------------------------------------------------------------


def ecdf_transform(column, reference=None) -> np.ndarray:
    """Map each value to (count of reference entries <= value) / N.

    Ties share the maximal rank.  ``reference`` defaults to the column
    itself; pass the stored training column to transform new data.
    """
    column = np.asarray(column, dtype=float)
    if column.size == 0:
        raise DataError("cannot ECDF-transform an empty column")
    ref = column if reference is None else np.asarray(reference, dtype=float)
    if ref.size == 0:
        raise DataError("empty ECDF reference column")
    sorted_ref = np.sort(ref)
    ranks = np.searchsorted(sorted_ref, column, side="right")
    return ranks / sorted_ref.size


# -- schema and loading -----------------------------------------------------------


@dataclass(frozen=True)
class DataSchema:
    """Column roles for a CSV dataset.

    ``monotone`` columns become the constrained covariates, in order;
    names also listed in ``inverted`` enter as 1 - ECDF.  Ordinal covariate
    categories pass through the same ECDF (equivalent to midranks under the
    maximal-rank tie rule).  ``apply_ecdf=False`` requires the monotone
    columns to already lie in [0, 1].
    """

    response: str
    n_categories: int
    monotone: tuple[str, ...]
    inverted: tuple[str, ...] = ()
    linear: tuple[str, ...] = ()
    cluster: str | None = None
    apply_ecdf: bool = True

    def __post_init__(self):
        if self.n_categories < 2:
            raise DataError("need at least two response categories")
        if not self.monotone:
            raise DataError("need at least one monotone covariate")
        unknown = set(self.inverted) - set(self.monotone)
        if unknown:
            raise DataError(f"inverted columns not in monotone list: {sorted(unknown)}")


@dataclass
class LoadedData:
    dataset: Dataset
    schema: DataSchema
    ecdf_reference: dict[str, np.ndarray]
    cluster_labels: list[str] | None = None


def _parse_cell(raw: str, column: str, row_num: int) -> float:
    raw = raw.strip()
    if raw == "":
        raise DataError(f"row {row_num}: missing value in column {column!r}")
    try:
        return float(raw)
    except ValueError:
        raise DataError(
            f"row {row_num}: non-numeric value {raw!r} in column {column!r}"
        ) from None


def load_dataset(path, schema: DataSchema) -> LoadedData:
    """Read a CSV with a header row and build a validated Dataset."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        needed = [schema.response, *schema.monotone, *schema.linear]
        if schema.cluster:
            needed.append(schema.cluster)
        missing = [c for c in needed if c not in header]
        if missing:
            raise DataError(f"missing columns: {missing}")
        rows = list(reader)
    if not rows:
        raise DataError("dataset has no rows")

    n = len(rows)
    y = np.empty(n, dtype=np.int64)
    raw_monotone = {c: np.empty(n) for c in schema.monotone}
    Z = np.empty((n, len(schema.linear))) if schema.linear else None
    cluster_raw: list[str] = []
    for i, row in enumerate(rows):
        row_num = i + 2  # header is line 1
        val = _parse_cell(row[schema.response], schema.response, row_num)
        if val != int(val) or not 1 <= val <= schema.n_categories:
            raise DataError(
                f"row {row_num}: response {val!r} outside 1..{schema.n_categories}"
            )
        y[i] = int(val)
        for c in schema.monotone:
            raw_monotone[c][i] = _parse_cell(row[c], c, row_num)
        for j, c in enumerate(schema.linear):
            Z[i, j] = _parse_cell(row[c], c, row_num)
        if schema.cluster:
            label = row[schema.cluster].strip()
            if label == "":
                raise DataError(f"row {row_num}: missing cluster id")
            cluster_raw.append(label)

    reference: dict[str, np.ndarray] = {}
    X = np.empty((n, len(schema.monotone)))
    for j, c in enumerate(schema.monotone):
        col = raw_monotone[c]
        if schema.apply_ecdf:
            reference[c] = np.sort(col)
            col = ecdf_transform(col)
            if np.all(col == 1.0):
                # constant column: every value shares the maximal rank
                pass
        elif np.any(col < 0.0) or np.any(col > 1.0):
            raise DataError(f"column {c!r} outside [0,1] with ECDF disabled")
        if c in schema.inverted:
            col = 1.0 - col
        X[:, j] = col

    cluster = None
    cluster_labels = None
    if schema.cluster:
        cluster_labels = sorted(set(cluster_raw))
        index = {label: i + 1 for i, label in enumerate(cluster_labels)}
        cluster = np.array([index[label] for label in cluster_raw], dtype=np.int64)

    dataset = Dataset(X=X, y=y, Z=Z, cluster=cluster)
    return LoadedData(
        dataset=dataset,
        schema=schema,
        ecdf_reference=reference,
        cluster_labels=cluster_labels,
    )


# -- run manifests -----------------------------------------------------------------


@dataclass
class RunManifest:
    """Everything needed to reproduce a run, plus bookkeeping metadata."""

    command: str
    model: dict
    sampler: dict
    data: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    version: str = PACKAGE_VERSION
    format_version: int = FORMAT_VERSION
    created: str = ""

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        payload = json.loads(text)
        return cls(**payload)

    def write(self, path):
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def read(cls, path) -> "RunManifest":
        return cls.from_json(Path(path).read_text())


def timestamp() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%S%z")


def model_to_dict(model: ModelSpec) -> dict:
    return {
        "n_categories": model.n_categories,
        "n_covariates": model.n_covariates,
        "link": model.link.kind,
        "range": [model.link.lower, model.link.upper],
        "n_linear": model.n_linear,
        "n_clusters": model.n_clusters,
        "a": model.a,
        "b": model.b,
        "d": model.d,
        "tau2_shape": model.tau2_shape,
        "tau2_rate": model.tau2_rate,
    }


def model_from_dict(payload: dict) -> ModelSpec:
    kind = payload["link"]
    lo, hi = payload["range"]
    link = LinkSpec.identity() if kind == "identity" else LinkSpec.logit(lo, hi)
    return ModelSpec(
        n_categories=payload["n_categories"],
        n_covariates=payload["n_covariates"],
        link=link,
        n_linear=payload.get("n_linear", 0),
        n_clusters=payload.get("n_clusters", 0),
        a=payload.get("a", 0.1),
        b=payload.get("b", 0.1),
        d=payload.get("d", 0),
        tau2_shape=payload.get("tau2_shape", 0.01),
        tau2_rate=payload.get("tau2_rate", 0.01),
    )


def sampler_to_dict(cfg: SamplerConfig) -> dict:
    return {
        "iterations": cfg.iterations,
        "burn_in": cfg.burn_in,
        "thin": cfg.thin,
        "seed": cfg.seed,
        "birth_weight": cfg.birth_weight,
        "death_weight": cfg.death_weight,
        "death_birth_weight": cfg.death_birth_weight,
        "position_weight": cfg.position_weight,
        "joint_level_weight": cfg.joint_level_weight,
        "single_level_weight": cfg.single_level_weight,
        "origin_level_weight": cfg.origin_level_weight,
        "beta_scale": cfg.beta_scale,
        "gamma_scale": cfg.gamma_scale,
        "adapt": cfg.adapt,
        "mark_max_tries": cfg.mark_max_tries,
    }


def sampler_from_dict(payload: dict) -> SamplerConfig:
    return SamplerConfig(**payload)


# -- plain-text config files ----------------------------------------------------------


def read_config(path) -> tuple[ModelSpec, SamplerConfig, DataSchema | None, dict]:
    """Parse an INI-style run configuration.

    Sections: [model], [sampler], optional [data].  Returns the resolved
    model spec, sampler config, data schema (None without a [data] section)
    and a dict of raw extras such as the dataset path.
    """
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise DataError(f"cannot read config file {path}")

    if "model" not in parser:
        raise DataError("config needs a [model] section")
    m = parser["model"]
    kind = m.get("link", "identity").strip()
    if kind == "identity":
        link = LinkSpec.identity()
    elif kind == "logit":
        rng = m.get("range", "-5 5").split()
        if len(rng) != 2:
            raise DataError("model.range must hold two numbers")
        link = LinkSpec.logit(float(rng[0]), float(rng[1]))
    else:
        raise DataError(f"unknown link {kind!r}")

    schema = None
    extras: dict = {}
    n_linear = 0
    has_cluster = False
    if "data" in parser:
        d = parser["data"]
        monotone = tuple(d.get("monotone", "").split())
        schema = DataSchema(
            response=d.get("response", "y"),
            n_categories=m.getint("categories", 5),
            monotone=monotone,
            inverted=tuple(d.get("inverted", "").split()),
            linear=tuple(d.get("linear", "").split()),
            cluster=d.get("cluster", "").strip() or None,
            apply_ecdf=d.getboolean("ecdf", True),
        )
        extras["data_path"] = d.get("path", "")
        n_linear = len(schema.linear)
        has_cluster = schema.cluster is not None

    n_covariates = m.getint("covariates", len(schema.monotone) if schema else 2)
    model = ModelSpec(
        n_categories=m.getint("categories", 5),
        n_covariates=n_covariates,
        link=link,
        n_linear=n_linear,
        n_clusters=0,  # resolved after loading when clusters are present
        a=m.getfloat("a", 0.1),
        b=m.getfloat("b", 0.1),
        d=m.getint("d", 0),
        tau2_shape=m.getfloat("tau2_shape", 0.01),
        tau2_rate=m.getfloat("tau2_rate", 0.01),
    )
    extras["has_cluster"] = has_cluster

    s = parser["sampler"] if "sampler" in parser else {}
    def _sf(key, default):
        return float(s.get(key, default)) if key in s else default

    sampler = SamplerConfig(
        iterations=int(s.get("iterations", 50_000)),
        burn_in=int(s.get("burn_in", 10_000)),
        thin=int(s.get("thin", 20)),
        seed=int(s.get("seed", 0)),
        birth_weight=_sf("birth_weight", 0.4),
        death_weight=_sf("death_weight", 0.4),
        death_birth_weight=_sf("death_birth_weight", 0.2),
        position_weight=_sf("position_weight", 1.0),
        joint_level_weight=_sf("joint_level_weight", 1.0),
        single_level_weight=_sf("single_level_weight", 1.0),
        origin_level_weight=_sf("origin_level_weight", 1.0),
        beta_scale=_sf("beta_scale", 0.1),
        gamma_scale=_sf("gamma_scale", 0.1),
        adapt=str(s.get("adapt", "true")).lower() in ("1", "true", "yes"),
    )
    return model, sampler, schema, extras


# -- sample streams ----------------------------------------------------------------


def _record_to_json(record: SampleRecord) -> str:
    payload = {
        "it": record.iteration,
        "loglik": record.loglik,
        "counts": record.counts.tolist(),
        "rho": record.intensities.tolist(),
        "origin": record.origin_marks.tolist(),
        "points": [
            [sub, loc.tolist(), marks.tolist()] for sub, loc, marks in record.points
        ],
        "beta": record.beta.tolist(),
        "gamma": record.gamma.tolist(),
        "tau2": record.tau2,
    }
    return json.dumps(payload, separators=(",", ":"))


def _record_from_json(line: str) -> SampleRecord:
    payload = json.loads(line)
    return SampleRecord(
        iteration=payload["it"],
        counts=np.asarray(payload["counts"], dtype=np.int64),
        intensities=np.asarray(payload["rho"], dtype=float),
        origin_marks=np.asarray(payload["origin"], dtype=float),
        points=[
            (int(sub), np.asarray(loc, dtype=float), np.asarray(marks, dtype=float))
            for sub, loc, marks in payload["points"]
        ],
        loglik=payload["loglik"],
        beta=np.asarray(payload["beta"], dtype=float),
        gamma=np.asarray(payload["gamma"], dtype=float),
        tau2=payload["tau2"],
    )


def write_records(path, records) -> int:
    """Stream records to an NDJSON file; returns the number written."""
    count = 0
    with Path(path).open("w") as fh:
        fh.write(
            json.dumps(
                {"format": "monoord-samples", "version": FORMAT_VERSION},
                separators=(",", ":"),
            )
            + "\n"
        )
        for record in records:
            fh.write(_record_to_json(record) + "\n")
            count += 1
    return count


def read_records(path) -> list[SampleRecord]:
    with Path(path).open() as fh:
        header = json.loads(fh.readline())
        if header.get("format") != "monoord-samples":
            raise DataError(f"{path} is not a sample stream")
        if header.get("version") != FORMAT_VERSION:
            raise DataError(f"unsupported stream version {header.get('version')}")
        return [_record_from_json(line) for line in fh if line.strip()]


def iter_records(path):
    with Path(path).open() as fh:
        header = json.loads(fh.readline())
        if header.get("format") != "monoord-samples":
            raise DataError(f"{path} is not a sample stream")
        for line in fh:
            if line.strip():
                yield _record_from_json(line)


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def write_csv(path, header: list[str], rows) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])

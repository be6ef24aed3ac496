"""Figure rendering from monoord CSV outputs.

Each job maps one or more summary CSVs to a single static image.  Output is
deterministic for fixed inputs: SVG metadata timestamps are disabled and
element ids are salted with a fixed string.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
from scipy.stats import gaussian_kde

matplotlib.rcParams["svg.hashsalt"] = "monoord-plots"

PLOT_KINDS = (
    "surface-grid",
    "perspective",
    "conditional",
    "loglik-density",
    "mae-box",
)


class SchemaError(ValueError):
    """An input CSV does not have the columns the plot kind needs."""


@dataclass(frozen=True)
class PlotJob:
    """One figure: input summary CSVs, the plot kind, and the output path."""

    kind: str
    inputs: tuple[str, ...]
    output: str
    labels: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in PLOT_KINDS:
            raise SchemaError(f"unknown plot kind {self.kind!r}")
        if not self.inputs:
            raise SchemaError("plot job needs at least one input file")


def _read_csv(path) -> tuple[list[str], np.ndarray]:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SchemaError(f"{path}: empty file")
        rows = list(reader)
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    try:
        data = np.array([[float(v) for v in row] for row in rows])
    except ValueError as exc:
        raise SchemaError(f"{path}: non-numeric cell ({exc})") from None
    return header, data


def _columns(path, header, data, *names) -> list[np.ndarray]:
    missing = [n for n in names if n not in header]
    if missing:
        raise SchemaError(f"{path}: missing columns {missing} (has {header})")
    return [data[:, header.index(n)] for n in names]


def _surface(path):
    header, data = _read_csv(path)
    x1, x2, s = _columns(path, header, data, "x1", "x2", "mean_survival")
    g1 = np.unique(x1)
    g2 = np.unique(x2)
    if g1.size * g2.size != s.size:
        raise SchemaError(f"{path}: rows do not form a full grid")
    return g1, g2, s.reshape(g1.size, g2.size)


def _save(fig, output):
    path = Path(output)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, metadata={"Date": None} if path.suffix == ".svg" else None)
    plt.close(fig)
    return path


def _render_surface_grid(job: PlotJob):
    n = len(job.inputs)
    fig, axes = plt.subplots(1, n, figsize=(3.2 * n, 3.0), squeeze=False)
    for ax, path in zip(axes[0], job.inputs):
        g1, g2, grid = _surface(path)
        im = ax.pcolormesh(g1, g2, grid.T, vmin=0.0, vmax=1.0, shading="auto")
        ax.set_xlabel(job.labels.get("xlabel", "x1"))
        ax.set_ylabel(job.labels.get("ylabel", "x2"))
        ax.set_title(Path(path).stem)
    fig.colorbar(im, ax=axes[0].tolist(), fraction=0.03)
    fig.suptitle(job.labels.get("title", "posterior mean survival"))
    return _save(fig, job.output)


def _render_perspective(job: PlotJob):
    fig = plt.figure(figsize=(6.0, 4.8))
    ax = fig.add_subplot(projection="3d")
    cmaps = ["viridis", "plasma", "cividis", "magma", "inferno"]
    for i, path in enumerate(job.inputs):
        g1, g2, grid = _surface(path)
        A, B = np.meshgrid(g1, g2, indexing="ij")
        ax.plot_surface(
            A, B, grid, cmap=cmaps[i % len(cmaps)], alpha=0.8,
            linewidth=0, antialiased=False,
        )
    ax.set_xlabel(job.labels.get("xlabel", "x1"))
    ax.set_ylabel(job.labels.get("ylabel", "x2"))
    ax.set_zlabel(job.labels.get("zlabel", "survival"))
    ax.set_title(job.labels.get("title", "posterior mean surfaces"))
    return _save(fig, job.output)


def _render_conditional(job: PlotJob):
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    for path in job.inputs:
        header, data = _read_csv(path)
        x, s = _columns(path, header, data, "x", "mean_survival")
        ax.plot(x, s, label=Path(path).stem)
    ax.set_xlabel(job.labels.get("xlabel", "covariate"))
    ax.set_ylabel(job.labels.get("ylabel", "mean survival"))
    ax.set_ylim(0, 1)
    ax.legend(fontsize=8)
    ax.set_title(job.labels.get("title", "standardized regression functions"))
    return _save(fig, job.output)


def _loglik_column(path):
    header, data = _read_csv(path)
    return _columns(path, header, data, "loglik")[0]


def _render_loglik_density(job: PlotJob):
    if len(job.inputs) < 2:
        raise SchemaError("log-likelihood comparison needs two trace files")
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    colors = ["tab:blue", "tab:red", "tab:green"]
    names = job.labels.get("names", ["model", "baseline"])
    for i, path in enumerate(job.inputs):
        ll = _loglik_column(path)
        color = colors[i % len(colors)]
        if np.ptp(ll) > 0:
            kde = gaussian_kde(ll)
            grid = np.linspace(ll.min() - 2 * ll.std(), ll.max() + 2 * ll.std(), 400)
            ax.plot(grid, kde(grid), color=color,
                    label=names[i] if i < len(names) else Path(path).stem)
        ax.axvline(ll.mean(), color=color, linestyle="--", linewidth=1)
    ax.set_xlabel("log-likelihood")
    ax.set_ylabel("posterior density")
    ax.legend(fontsize=8)
    ax.set_title(job.labels.get("title", "model fit comparison"))
    return _save(fig, job.output)


def _render_mae_box(job: PlotJob):
    header, data = _read_csv(job.inputs[0])
    cols = [c for c in header if c.startswith("mae_")]
    if not cols:
        raise SchemaError(f"{job.inputs[0]}: no mae_* columns")
    values = [data[:, header.index(c)] for c in cols]
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    ax.boxplot(values, tick_labels=[c.removeprefix("mae_") for c in cols])
    ax.set_xlabel("category")
    ax.set_ylabel("mean absolute error")
    ax.set_title(job.labels.get("title", "error by category"))
    return _save(fig, job.output)


_RENDERERS = {
    "surface-grid": _render_surface_grid,
    "perspective": _render_perspective,
    "conditional": _render_conditional,
    "loglik-density": _render_loglik_density,
    "mae-box": _render_mae_box,
}


def render(job: PlotJob) -> Path:
    """Render one job to its output image; returns the written path."""
    return _RENDERERS[job.kind](job)

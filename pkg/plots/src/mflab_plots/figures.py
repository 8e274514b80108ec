"""Figure rendering from ergodicity CSV logs.

Consumes the two delimited outputs of the ergodicity harness command:

* ``ergodicity_timeavg.csv`` with columns ``n, p, path, t, time_avg`` —
  running time averages (1/T) sum_k mean_i S_k[i]^p per path, plus an
  ``overall`` row holding the across-path mean at each checkpoint.
* ``ergodicity_hist.csv`` with columns ``n, path, bin_left, bin_right,
  count, density`` — final-step hidden-unit histograms (200 bins on the
  activation range), per path plus a pooled ``overall`` row set.

Three figures are derived from them:

* fig1 — per (N, p) panel: grey min/max band of the per-path time
  averages versus T (log axis) with the red across-path mean on top.
* fig2 — per-N panel: grey per-path histogram curves with the red
  pooled curve on top.
* fig3 — single axis overlaying the pooled histogram curves of every N.

Rendering is a pure function of the CSV content; with the pinned
matplotlib version the output bytes are reproducible.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


class PlotError(Exception):
    """Raised when inputs are missing, malformed, or empty."""


_GREY = "0.6"
_RED = "tab:red"
_SAVE_KW = dict(dpi=150, metadata={"Software": "mflab-plots"})

TIMEAVG_COLUMNS = ("n", "p", "path", "t", "time_avg")
HIST_COLUMNS = ("n", "path", "bin_left", "bin_right", "count", "density")


@dataclass(frozen=True)
class FigureSpec:
    """One figure to render.

    figure    -- "fig1" | "fig2" | "fig3"
    in_dir    -- directory holding the ergodicity CSVs
    out_path  -- image file to write
    band_color / path_color / mean_color -- styling (grey band and
                 per-path lines, red mean/overall line)
    """

    figure: str
    in_dir: str
    out_path: str
    band_color: str = _GREY
    path_color: str = _GREY
    mean_color: str = _RED

    def __post_init__(self):
        if self.figure not in ("fig1", "fig2", "fig3"):
            raise PlotError(f"unknown figure id {self.figure!r}")


@dataclass
class Table:
    """A parsed CSV: column name -> list of string cells."""

    path: str
    columns: dict[str, list[str]] = field(default_factory=dict)

    def col(self, name: str, dtype=float) -> np.ndarray:
        return np.asarray(self.columns[name], dtype=dtype)

    def rows(self) -> int:
        return len(next(iter(self.columns.values())))


def read_table(path: str, required: tuple[str, ...]) -> Table:
    """Read a harness CSV, skipping ``#`` comment lines.

    Raises PlotError naming each missing column if the header does not
    carry the expected schema, and if the file has no data rows.
    """
    if not os.path.exists(path):
        raise PlotError(f"input file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(line for line in fh if not line.startswith("#"))
        try:
            header = next(reader)
        except StopIteration:
            raise PlotError(f"{path}: empty file") from None
        missing = [c for c in required if c not in header]
        if missing:
            raise PlotError(
                f"{path}: missing required column(s) {', '.join(missing)}; "
                f"found {', '.join(header)}")
        cols: dict[str, list[str]] = {name: [] for name in header}
        for row in reader:
            for name, cell in zip(header, row):
                cols[name].append(cell)
    table = Table(path, cols)
    if table.rows() == 0:
        raise PlotError(f"{path}: no data rows")
    return table


def _n_grid(table: Table) -> list[int]:
    return sorted({int(float(v)) for v in table.columns["n"]})


def _path_labels(path_col: np.ndarray) -> list[str]:
    """Per-path labels in first-appearance order, excluding ``overall``."""
    labels = [p for p in dict.fromkeys(path_col.tolist()) if p != "overall"]
    if not labels:
        raise PlotError("no per-path rows found (empty path set)")
    return labels


def render_fig1(spec: FigureSpec) -> str:
    """Time-average convergence bands: one panel per (N, p)."""
    table = read_table(os.path.join(spec.in_dir, "ergodicity_timeavg.csv"),
                       TIMEAVG_COLUMNS)
    n_col = table.col("n", int)
    p_col = table.col("p", int)
    path_col = table.col("path", str)
    t_col = table.col("t", int)
    avg_col = table.col("time_avg")

    n_grid = _n_grid(table)
    p_grid = sorted(set(p_col.tolist()))
    fig, axes = plt.subplots(len(p_grid), len(n_grid), squeeze=False,
                             figsize=(4.0 * len(n_grid), 3.0 * len(p_grid)),
                             sharex="col")
    for row, p in enumerate(p_grid):
        for col, n in enumerate(n_grid):
            ax = axes[row][col]
            sel = (n_col == n) & (p_col == p)
            labels = _path_labels(path_col[sel])
            times = np.unique(t_col[sel])
            per_path = np.empty((len(labels), times.size))
            for i, lab in enumerate(labels):
                s = sel & (path_col == lab)
                order = np.argsort(t_col[s])
                per_path[i] = avg_col[s][order]
            ax.fill_between(times, per_path.min(axis=0), per_path.max(axis=0),
                            color=spec.band_color, alpha=0.5, lw=0,
                            label="path min/max")
            s = sel & (path_col == "overall")
            order = np.argsort(t_col[s])
            ax.plot(t_col[s][order], avg_col[s][order], color=spec.mean_color,
                    lw=1.5, label="mean")
            ax.set_xscale("log")
            ax.set_title(f"N={n}, p={p}")
            if row == len(p_grid) - 1:
                ax.set_xlabel("T")
            if col == 0:
                ax.set_ylabel(f"timeAvg (p={p})")
    axes[0][0].legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(spec.out_path, **_SAVE_KW)
    plt.close(fig)
    return spec.out_path


def _hist_curves(table: Table):
    """Per-N dict: (bin centers, per-path density matrix, overall density)."""
    n_col = table.col("n", int)
    path_col = table.col("path", str)
    left = table.col("bin_left")
    right = table.col("bin_right")
    density = table.col("density")
    out = {}
    for n in _n_grid(table):
        sel = n_col == n
        labels = _path_labels(path_col[sel])
        s0 = sel & (path_col == labels[0])
        order = np.argsort(left[s0])
        centers = 0.5 * (left[s0][order] + right[s0][order])
        per_path = np.empty((len(labels), centers.size))
        for i, lab in enumerate(labels):
            s = sel & (path_col == lab)
            per_path[i] = density[s][np.argsort(left[s])]
        s = sel & (path_col == "overall")
        overall = density[s][np.argsort(left[s])]
        out[n] = (centers, per_path, overall)
    return out


def render_fig2(spec: FigureSpec) -> str:
    """Final-step hidden-unit distributions: one panel per N."""
    table = read_table(os.path.join(spec.in_dir, "ergodicity_hist.csv"),
                       HIST_COLUMNS)
    curves = _hist_curves(table)
    fig, axes = plt.subplots(1, len(curves), squeeze=False,
                             figsize=(4.0 * len(curves), 3.2), sharey=True)
    for ax, (n, (centers, per_path, overall)) in zip(axes[0], curves.items()):
        for row in per_path:
            ax.plot(centers, row, color=spec.path_color, lw=0.6, alpha=0.6)
        ax.plot(centers, overall, color=spec.mean_color, lw=1.5)
        ax.set_title(f"N={n}")
        ax.set_xlabel("hidden-unit value")
    axes[0][0].set_ylabel("density")
    fig.tight_layout()
    fig.savefig(spec.out_path, **_SAVE_KW)
    plt.close(fig)
    return spec.out_path


def render_fig3(spec: FigureSpec) -> str:
    """Overall distributions overlaid across the N grid."""
    table = read_table(os.path.join(spec.in_dir, "ergodicity_hist.csv"),
                       HIST_COLUMNS)
    curves = _hist_curves(table)
    fig, ax = plt.subplots(figsize=(5.0, 3.5))
    for n, (centers, _per_path, overall) in curves.items():
        ax.plot(centers, overall, lw=1.2, label=f"N={n}")
    ax.set_xlabel("hidden-unit value")
    ax.set_ylabel("density")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(spec.out_path, **_SAVE_KW)
    plt.close(fig)
    return spec.out_path


_RENDERERS = {"fig1": render_fig1, "fig2": render_fig2, "fig3": render_fig3}


def render(spec: FigureSpec) -> str:
    """Render one figure; returns the written image path."""
    return _RENDERERS[spec.figure](spec)

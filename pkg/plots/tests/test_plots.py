"""Tests for the figure-generation package.

The input CSVs are produced by the primary package's CLI (its external
interface); the renderer is then exercised end to end on them.
"""

import os
import subprocess
import sys

import numpy as np
import pytest

from mflab_plots import FigureSpec, PlotError, read_table, render
from mflab_plots.cli import main
from mflab_plots.figures import HIST_COLUMNS, TIMEAVG_COLUMNS


@pytest.fixture(scope="session")
def csv_dir(tmp_path_factory):
    """Small-scale ergodicity CSVs generated through the primary CLI."""
    out = tmp_path_factory.mktemp("csv")
    proc = subprocess.run(
        [sys.executable, "-m", "mflab.cli", "ergodicity",
         "--n-grid", "50,100", "--paths", "4", "--steps", "200",
         "--out-dir", str(out)],
        capture_output=True, text=True)
    assert proc.returncode != 2, proc.stderr
    assert (out / "ergodicity_timeavg.csv").exists()
    assert (out / "ergodicity_hist.csv").exists()
    return str(out)


def test_render_all_figures(csv_dir, tmp_path):
    for fig_id in ("fig1", "fig2", "fig3"):
        path = str(tmp_path / f"{fig_id}.png")
        out = render(FigureSpec(figure=fig_id, in_dir=csv_dir, out_path=path))
        assert out == path
        assert os.path.getsize(path) > 1000


def test_fig1_band_encloses_mean(csv_dir):
    table = read_table(os.path.join(csv_dir, "ergodicity_timeavg.csv"),
                       TIMEAVG_COLUMNS)
    n_col = table.col("n", int)
    p_col = table.col("p", int)
    path_col = table.col("path", str)
    t_col = table.col("t", int)
    avg = table.col("time_avg")
    for n in np.unique(n_col):
        for p in np.unique(p_col):
            sel = (n_col == n) & (p_col == p)
            for t in np.unique(t_col[sel]):
                here = sel & (t_col == t)
                paths = avg[here & (path_col != "overall")]
                mean = avg[here & (path_col == "overall")]
                assert mean.size == 1
                assert paths.min() <= mean[0] <= paths.max()


def test_deterministic_rendering(csv_dir, tmp_path):
    a, b = str(tmp_path / "a.png"), str(tmp_path / "b.png")
    render(FigureSpec(figure="fig2", in_dir=csv_dir, out_path=a))
    render(FigureSpec(figure="fig2", in_dir=csv_dir, out_path=b))
    assert open(a, "rb").read() == open(b, "rb").read()


def test_missing_column_named(tmp_path):
    path = tmp_path / "ergodicity_hist.csv"
    path.write_text("n,path,bin_left,count\n100,0,0.0,5\n")
    with pytest.raises(PlotError, match="bin_right, density"):
        read_table(str(path), HIST_COLUMNS)


def test_missing_file(tmp_path):
    with pytest.raises(PlotError, match="not found"):
        render(FigureSpec(figure="fig3", in_dir=str(tmp_path),
                          out_path=str(tmp_path / "x.png")))


def test_empty_path_set(tmp_path):
    path = tmp_path / "ergodicity_hist.csv"
    path.write_text("n,path,bin_left,bin_right,count,density\n"
                    "100,overall,0.0,0.005,5,1.0\n")
    with pytest.raises(PlotError, match="empty path set"):
        render(FigureSpec(figure="fig2", in_dir=str(tmp_path),
                          out_path=str(tmp_path / "x.png")))


def test_empty_file(tmp_path):
    path = tmp_path / "ergodicity_hist.csv"
    path.write_text("n,path,bin_left,bin_right,count,density\n")
    with pytest.raises(PlotError, match="no data rows"):
        read_table(str(path), HIST_COLUMNS)


def test_bad_figure_id():
    with pytest.raises(PlotError, match="unknown figure id"):
        FigureSpec(figure="fig9", in_dir=".", out_path="x.png")


def test_cli_all(csv_dir, tmp_path):
    assert main(["--in", csv_dir, "--fig", "all",
                 "--out", str(tmp_path)]) == 0
    for fig_id in ("fig1", "fig2", "fig3"):
        assert (tmp_path / f"{fig_id}.png").exists()


def test_cli_error_exit_codes(tmp_path):
    assert main(["--in", str(tmp_path / "nowhere"), "--fig", "1",
                 "--out", str(tmp_path)]) == 1
    with pytest.raises(SystemExit) as exc:
        main(["--in", ".", "--fig", "9", "--out", "."])
    assert exc.value.code == 2

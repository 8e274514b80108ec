"""Figure generation from mflab ergodicity CSV logs."""

from .figures import (FigureSpec, PlotError, read_table, render, render_fig1,
                      render_fig2, render_fig3)

__version__ = "0.1.0"

__all__ = ["FigureSpec", "PlotError", "read_table", "render", "render_fig1",
           "render_fig2", "render_fig3", "__version__"]

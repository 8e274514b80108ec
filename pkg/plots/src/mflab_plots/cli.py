"""Command-line entry point: mflab-plots --in <dir> --fig {1,2,3,all} --out <dir>."""

from __future__ import annotations

import argparse
import os
import sys

from .figures import FigureSpec, PlotError, render

_FIG_IDS = {"1": ["fig1"], "2": ["fig2"], "3": ["fig3"],
            "all": ["fig1", "fig2", "fig3"]}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mflab-plots",
        description="Render figures from ergodicity CSV logs.")
    parser.add_argument("--in", dest="in_dir", required=True,
                        help="directory holding the ergodicity CSVs")
    parser.add_argument("--fig", choices=sorted(_FIG_IDS), required=True,
                        help="which figure to render")
    parser.add_argument("--out", dest="out_dir", required=True,
                        help="directory to write image files into")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    os.makedirs(args.out_dir, exist_ok=True)
    try:
        for fig_id in _FIG_IDS[args.fig]:
            spec = FigureSpec(figure=fig_id, in_dir=args.in_dir,
                              out_path=os.path.join(args.out_dir,
                                                    f"{fig_id}.png"))
            print(f"wrote {render(spec)}")
    except PlotError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

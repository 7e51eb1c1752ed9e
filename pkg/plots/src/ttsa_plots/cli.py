"""Command-line figure rendering.

    ttsa-plots --in <artifacts> --kind trace|floor-vs-M|sweep --out fig.svg
"""

from __future__ import annotations

import argparse
import sys

from ttsa_plots.figures import KINDS, FigureSpec, SchemaError, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="ttsa-plots")
    parser.add_argument("--in", dest="input_path", required=True,
                        help="artifact directory (trace, floor-vs-M) or report file (sweep)")
    parser.add_argument("--kind", required=True, choices=KINDS)
    parser.add_argument("--out", required=True, help="output image (.svg or .png)")
    parser.add_argument("--metric", default="auto",
                        help="trace column to plot (default: theta_err_sq when present)")
    parser.add_argument("--title", default="")
    args = parser.parse_args(argv)

    spec = FigureSpec(input_path=args.input_path, kind=args.kind,
                      output_path=args.out, metric=args.metric, title=args.title)
    try:
        out = render(spec)
    except (SchemaError, FileNotFoundError, AssertionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command line: ``plot <figure-kind> --csv <path> --summary <path> --out <path.png>``."""

import argparse
import sys

from .render import FIGURE_KINDS, PlotJob, SchemaError, render


def build_parser():
    parser = argparse.ArgumentParser(
        prog="plot", description="Render figures from experiment result files."
    )
    parser.add_argument("kind", choices=FIGURE_KINDS, help="figure kind")
    parser.add_argument("--csv", required=True, help="results.csv (or region.txt for 'region')")
    parser.add_argument("--summary", default=None, help="summary.json of the same run")
    parser.add_argument("--out", required=True, help="output image path (.png)")
    parser.add_argument("--linear-x", action="store_true", help="linear instead of log x axis")
    parser.add_argument("--linear-y", action="store_true", help="linear instead of log y axis")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    job = PlotJob(
        kind=args.kind,
        csv_path=args.csv,
        summary_path=args.summary,
        out_path=args.out,
        log_x=not args.linear_x,
        log_y=not args.linear_y,
    )
    try:
        render(job)
    except (SchemaError, OSError) as exc:
        print(f"plot error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.out} and {args.out}.data.json")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

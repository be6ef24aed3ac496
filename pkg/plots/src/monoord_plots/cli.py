"""Command-line figure rendering: one invocation, one image.

Exit codes: 0 success, 1 usage error, 2 input/schema error.
"""

from __future__ import annotations

import argparse
import sys

from .jobs import PLOT_KINDS, PlotJob, SchemaError, render


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _Usage(message)


class _Usage(Exception):
    pass


def build_parser() -> _Parser:
    parser = _Parser(prog="monoord-plots", description=__doc__)
    parser.add_argument("--kind", choices=PLOT_KINDS, required=True)
    parser.add_argument("--input", nargs="+", required=True, metavar="CSV")
    parser.add_argument("--out", required=True, metavar="IMAGE")
    parser.add_argument("--title", default=None)
    parser.add_argument("--names", nargs="*", default=None,
                        help="series names for comparison plots")
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except _Usage as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    labels = {}
    if args.title:
        labels["title"] = args.title
    if args.names:
        labels["names"] = args.names
    job = PlotJob(
        kind=args.kind, inputs=tuple(args.input), output=args.out, labels=labels
    )
    try:
        path = render(job)
    except (SchemaError, FileNotFoundError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

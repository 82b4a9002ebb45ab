"""Entry point: plot <kind> <csv...> -o out.png"""

from __future__ import annotations

import argparse
import sys

from .render import KINDS, PlotSpec, render
from .schema import SchemaError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plot", description="Render benchmark CSV outputs to figures")
    parser.add_argument("kind", choices=sorted(KINDS))
    parser.add_argument("csv", nargs="+", help="input CSV file(s)")
    parser.add_argument("-o", "--output", required=True, help="output image path")
    parser.add_argument("--title", default="", help="figure title override")
    parser.add_argument("--label", action="append", default=[],
                        help="legend label per input, repeatable")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = PlotSpec(kind=args.kind, inputs=tuple(args.csv), output=args.output,
                    title=args.title, labels=tuple(args.label))
    try:
        path = render(spec)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())

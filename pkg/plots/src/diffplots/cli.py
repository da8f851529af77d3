"""Plot CLI: render one figure from a plot-spec file, with field overrides."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from . import AGGREGATIONS, KINDS, SpecError, VALUE_COLUMNS, parse_plot_spec, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="diffrl-plot", description=__doc__)
    parser.add_argument("spec", help="plot spec file (INI, see package docs)")
    parser.add_argument("--output", default=None, help="override the output image path")
    parser.add_argument("--title", default=None)
    parser.add_argument("--kind", choices=KINDS, default=None)
    parser.add_argument("--aggregation", choices=AGGREGATIONS, default=None)
    parser.add_argument("--value-column", choices=VALUE_COLUMNS, default=None)
    parser.add_argument("--normalise", choices=("true", "false"), default=None)
    args = parser.parse_args(argv)
    try:
        spec = parse_plot_spec(args.spec)
        overrides = {}
        if args.output is not None:
            overrides["output"] = args.output
        if args.title is not None:
            overrides["title"] = args.title
        if args.kind is not None:
            overrides["kind"] = args.kind
        if args.aggregation is not None:
            overrides["aggregation"] = args.aggregation
        if args.value_column is not None:
            overrides["value_column"] = args.value_column
        if args.normalise is not None:
            overrides["normalise"] = args.normalise == "true"
        if overrides:
            spec = replace(spec, **overrides)
        out = render(spec)
    except (SpecError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command-line renderer: qdm-figure --figure N --input a.csv [...] --output fig.png."""

from __future__ import annotations

import argparse
import sys

from .recipes import FigureRecipe, RecipeError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qdm-figure", description=__doc__)
    parser.add_argument("--figure", type=int, required=True, help="figure id, 2..10")
    parser.add_argument("--input", nargs="+", required=True, help="input CSV path(s)")
    parser.add_argument("--output", required=True, help="output image (png/svg)")
    parser.add_argument("--dump", default=None, help="re-emit the plotted columns as CSV")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    recipe = FigureRecipe(
        figure_id=args.figure, inputs=args.input, output=args.output, dump=args.dump
    )
    try:
        recipe.render()
    except RecipeError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except FileNotFoundError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    print(args.output)
    return 0


if __name__ == "__main__":
    sys.exit(main())

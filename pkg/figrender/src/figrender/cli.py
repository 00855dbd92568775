"""render_figs <figure-id> <csv...> -o <png/svg>: exit 0 on success, 2 on bad input."""
import argparse
import sys

from .render import FIGURE_IDS, FigureSpec, RenderInputError, render


def build_parser():
    parser = argparse.ArgumentParser(
        prog="render_figs",
        description="Render one figure of the standard set from sweep CSVs.",
    )
    parser.add_argument("figure_id", choices=FIGURE_IDS, metavar="figure-id",
                        help=f"one of {', '.join(FIGURE_IDS)}")
    parser.add_argument("csv", nargs="+", help="input CSV file(s)")
    parser.add_argument("-o", "--out", required=True, help="output image path (.png or .svg)")
    parser.add_argument("--dpi", type=int, default=150)
    return parser


def main():
    args = build_parser().parse_args()
    spec = FigureSpec(args.figure_id, args.csv, args.out, dpi=args.dpi)
    try:
        render(spec)
    except RenderInputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        sys.exit(2)
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        sys.exit(2)
    print(args.out)


if __name__ == "__main__":
    main()

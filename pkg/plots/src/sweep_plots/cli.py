"""Command-line wrapper: ``plots <figure_kind> --in CSV --out IMG [...]``."""

from __future__ import annotations

import argparse
import sys

from sweep_plots.render import FIGURE_KINDS, PlotSpec, SchemaError, render


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plots", description="Render sweep CSVs into figures."
    )
    parser.add_argument("figure_kind", choices=FIGURE_KINDS)
    parser.add_argument("--in", dest="input_path", required=True, help="input CSV")
    parser.add_argument("--out", dest="output_path", required=True, help="output image")
    parser.add_argument("--x", default=None, help="x-axis column")
    parser.add_argument("--group", default=None, help="group-by column")
    parser.add_argument("--format", dest="fmt", choices=("svg", "png"), default=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    fmt = args.fmt
    if fmt is None:
        fmt = "png" if args.output_path.lower().endswith(".png") else "svg"
    try:
        spec = PlotSpec(
            figure_kind=args.figure_kind,
            input_path=args.input_path,
            output_path=args.output_path,
            x=args.x,
            group=args.group,
            fmt=fmt,
        )
        path = render(spec)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""figs <kind> <input.csv> -o <out.svg|png>

Exit codes: 0 success, 2 schema/usage error, 3 missing or unwritable file.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .render import FORMATS, FigureSpec, KINDS, SchemaMismatchError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="figs", description="Render mesonbell scan CSVs into static figures."
    )
    parser.add_argument("kind", choices=list(KINDS))
    parser.add_argument("input", help="CSV produced by the mesonbell CLI")
    parser.add_argument("-o", "--out", required=True, help="output .svg or .png path")
    parser.add_argument("--format", choices=list(FORMATS), default=None,
                        help="image format (default: from the output extension)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    fmt = args.format or Path(args.out).suffix.lstrip(".").lower()
    if fmt not in FORMATS:
        print(f"error: cannot infer image format from {args.out!r}; use --format",
              file=sys.stderr)
        return 2
    spec = FigureSpec(input_path=args.input, kind=args.kind,
                      output_path=args.out, image_format=fmt)
    try:
        render(spec)
    except SchemaMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())

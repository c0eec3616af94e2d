"""Command-line entry point: one invocation renders one figure.

Exit codes: 0 success, 2 schema or argument error, 3 IO error.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional

from .render import FIGURE_KINDS, FigureSpec, SchemaError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="commcs-plots", description="Render harness CSV reports into figures."
    )
    parser.add_argument(
        "--input",
        action="append",
        required=True,
        dest="inputs",
        help="input CSV path (repeatable)",
    )
    parser.add_argument("--kind", required=True, choices=FIGURE_KINDS)
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--title")
    parser.add_argument("--xlabel")
    parser.add_argument("--ylabel")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    spec = FigureSpec(
        inputs=tuple(args.inputs),
        kind=args.kind,
        output=args.out,
        title=args.title,
        xlabel=args.xlabel,
        ylabel=args.ylabel,
    )
    try:
        out = render(spec)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except IOError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 3
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

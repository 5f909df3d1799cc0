"""Command line entry point: render one figure from a JSON spec file."""

from __future__ import annotations

import argparse
import json
import sys

from .plot import SchemaError, plot


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="plot",
        description="Render a figure from serialized trajectory artifacts.",
    )
    parser.add_argument(
        "--spec",
        required=True,
        metavar="FILE",
        help="JSON figure spec: kind, trajectory, out, and optional keys",
    )
    args = parser.parse_args(argv)

    try:
        with open(args.spec, "r", encoding="utf-8") as fh:
            document = json.load(fh)
    except OSError as exc:
        print(f"error: cannot read spec {args.spec!r}: {exc}", file=sys.stderr)
        return 1
    except json.JSONDecodeError as exc:
        print(f"error: spec {args.spec!r} is not valid JSON: {exc}", file=sys.stderr)
        return 1

    try:
        out = plot(document)
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

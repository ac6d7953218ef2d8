"""`monivqa-render --kind <figure_kind> --in <csv...> --out <path>`."""
from __future__ import annotations

import argparse
import sys

from .render import FIGURE_KINDS, FigureSpec, RenderError, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="monivqa-render")
    parser.add_argument("--kind", required=True, choices=FIGURE_KINDS)
    parser.add_argument("--in", dest="inputs", nargs="+", required=True,
                        help="input CSV file(s)")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--collapse-json", default=None,
                        help="fit parameters for the collapse figure")
    parser.add_argument("--manifest", default=None,
                        help="run manifest (traces ground-energy line); "
                             "defaults to manifest.json beside the CSV")
    ns = parser.parse_args(sys.argv[1:] if argv is None else argv)
    spec = FigureSpec(ns.kind, ns.inputs, ns.out,
                      collapse_json=ns.collapse_json, manifest=ns.manifest)
    try:
        path = render(spec)
    except RenderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

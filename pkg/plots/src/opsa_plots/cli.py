"""Command line wrappers for the figure renderers."""

from __future__ import annotations

import argparse
import sys

from .figures import FigureSpec, render_convergence, render_rip_scatter


def _parse_where(pairs):
    where = {}
    for pair in pairs or ():
        if "=" not in pair:
            raise ValueError(f"--where expects key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        where[key] = value
    return where


def main_convergence(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plot-convergence",
        description="Plot per-cell convergence curves from a run manifest")
    parser.add_argument("--manifest", required=True)
    parser.add_argument("--group-by", required=True,
                        choices=["d", "kappa", "lambda", "outlier_fraction",
                                 "method"])
    parser.add_argument("--y", default="rel_error",
                        choices=["rel_error", "loss"])
    parser.add_argument("--out", required=True)
    parser.add_argument("--title", default=None)
    parser.add_argument("--where", action="append", metavar="KEY=VALUE",
                        help="only plot cells matching this value; repeatable")
    args = parser.parse_args(argv)
    try:
        spec = FigureSpec(manifest=args.manifest, group_by=args.group_by,
                          y=args.y, out=args.out, title=args.title,
                          where=_parse_where(args.where))
        result = render_convergence(spec)
    except (OSError, ValueError, KeyError) as exc:
        print(f"plot-convergence: {exc}", file=sys.stderr)
        return 2
    print(f"{len(result.curves)} curves, {result.total_points} points "
          f"-> {result.out}")
    return 0


def main_rip(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plot-rip",
        description="Scatter per-trial probe ratios with observed bounds")
    parser.add_argument("--csv", required=True)
    parser.add_argument("--out", required=True)
    args = parser.parse_args(argv)
    try:
        result = render_rip_scatter(args.csv, args.out)
    except (OSError, ValueError, KeyError) as exc:
        print(f"plot-rip: {exc}", file=sys.stderr)
        return 2
    print(f"{result.total_points} points -> {result.out}")
    return 0

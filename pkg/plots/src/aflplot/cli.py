"""Command line for rendering metrics comparisons.

Usage:
    aflplot plot --out fig.png --target 0.4 runA.csv:FedADT runB.csv:FedAsync
    aflplot bars --out t2t.png --target 0.9 runA.csv:FedADT runB.csv:FedAsync
"""

from __future__ import annotations

import argparse
import os
import sys

from .plotting import PlotSpec, SchemaError, build_target_bars, plot_curves


def parse_input(arg: str) -> tuple[str, str]:
    """Split 'path.csv:Label' into (path, label); label defaults to the stem."""
    path, sep, label = arg.rpartition(":")
    if not sep or not path:
        path, label = arg, ""
    if not label:
        label = os.path.splitext(os.path.basename(path))[0]
    return path, label


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aflplot", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_plot = sub.add_parser("plot", help="accuracy curves, one per input CSV")
    p_plot.add_argument("--out", required=True, help="output image path (.png or .svg)")
    p_plot.add_argument("--x", choices=("virtual_time", "round"), default="virtual_time")
    p_plot.add_argument("--target", type=float, default=None, help="horizontal target-accuracy line")
    p_plot.add_argument("--title", default="")
    p_plot.add_argument("inputs", nargs="+", help="metrics CSVs as path[:label]")

    p_bars = sub.add_parser("bars", help="time-to-target bar chart")
    p_bars.add_argument("--out", required=True)
    p_bars.add_argument("--target", type=float, required=True)
    p_bars.add_argument("inputs", nargs="+", help="metrics CSVs as path[:label]")

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    inputs = tuple(parse_input(a) for a in args.inputs)
    try:
        if args.command == "plot":
            spec = PlotSpec(
                inputs=inputs,
                out_path=args.out,
                x_axis=args.x,
                target_accuracy=args.target,
                title=args.title,
            )
            out = plot_curves(spec)
        else:
            out = build_target_bars(list(inputs), args.target, args.out)
    except (SchemaError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())

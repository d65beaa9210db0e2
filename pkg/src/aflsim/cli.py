"""Command-line entry points: run experiments, report results, export partitions.

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

from .config import RunConfig, build_dataset, load_config, run_experiment, validate_config
from .data import dirichlet_partition, save_partition
from .errors import ConfigError
from .metrics import build_report, format_report, read_metrics_csv, report_csv, write_metrics_csv
from .simengine import dump_trace

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _seeded_out_path(base: str, seed: int) -> str:
    root, ext = os.path.splitext(base)
    return f"{root}_seed{seed}{ext or '.csv'}"


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    if args.out is not None:
        cfg = dataclasses.replace(cfg, out=args.out)
    if args.trace is not None:
        cfg = dataclasses.replace(cfg, trace=args.trace)

    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else None
    if seeds is None:
        run_cfgs = [dataclasses.replace(cfg, seed=args.seed if args.seed is not None else cfg.seed)]
    else:
        run_cfgs = [
            dataclasses.replace(cfg, seed=s, out=_seeded_out_path(cfg.out, s)) for s in seeds
        ]

    for rc in run_cfgs:
        records, trace = run_experiment(rc)
        write_metrics_csv(records, rc.out)
        if rc.trace:
            dump_trace(trace, rc.trace)
        last = records[-1]
        print(
            f"{rc.strategy} seed={rc.seed}: {len(records)} evaluations, "
            f"final acc {last.test_accuracy:.4f} at round {last.round} "
            f"(t={last.virtual_time:.0f}s) -> {rc.out}"
        )
    return EXIT_OK


def _cmd_report(args: argparse.Namespace) -> int:
    runs = []
    for path in args.csv:
        label = os.path.splitext(os.path.basename(path))[0]
        runs.append((label, read_metrics_csv(path)))
    rows = build_report(runs, args.target, args.tg)
    print(format_report(rows, args.target, args.tg))
    if args.out:
        report_csv(rows, args.out)
    return EXIT_OK


def _cmd_partition(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    validate_config(cfg)
    ds, official_test = build_dataset(cfg)
    pseed = cfg.partition_seed if cfg.partition_seed is not None else cfg.seed
    test_frac = cfg.test_frac
    if test_frac is None:
        test_frac = 0.0 if (cfg.dataset == "idx" and official_test is not None) else 0.2
    spec = dirichlet_partition(
        ds,
        cfg.clients,
        cfg.dirichlet_alpha,
        distill_frac=cfg.distill_frac,
        test_frac=test_frac,
        seed=pseed,
    )
    save_partition(spec, args.out)
    sizes = [int(s.size) for s in spec.client_shards]
    print(
        f"partitioned {len(ds)} samples across {cfg.clients} clients "
        f"(shards {min(sizes)}..{max(sizes)}, distill {spec.distill_indices.size}, "
        f"test {spec.test_indices.size}) -> {args.out}"
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aflsim",
        description="Deterministic virtual-time simulator for asynchronous federated learning.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one simulation (or a seed sweep)")
    p_run.add_argument("--config", required=True, help="run configuration file")
    p_run.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_run.add_argument("--seeds", default=None, help="comma-separated seed sweep; one CSV per seed")
    p_run.add_argument("--out", default=None, help="override the metrics CSV path")
    p_run.add_argument("--trace", default=None, help="also dump an event trace file")
    p_run.set_defaults(func=_cmd_run)

    p_rep = sub.add_parser("report", help="compare metrics CSVs")
    p_rep.add_argument("--target", type=float, required=True, help="target accuracy for time-to-target")
    p_rep.add_argument("--tg", type=int, default=1000, help="round for the accuracy-at-round columns")
    p_rep.add_argument("--out", default=None, help="also write the table as CSV")
    p_rep.add_argument("csv", nargs="+", help="metrics CSV files")
    p_rep.set_defaults(func=_cmd_report)

    p_part = sub.add_parser("partition", help="build and export a client partition")
    p_part.add_argument("--config", required=True, help="run configuration file")
    p_part.add_argument("--out", required=True, help="partition spec output path")
    p_part.set_defaults(func=_cmd_partition)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

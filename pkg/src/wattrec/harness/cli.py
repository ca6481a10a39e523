"""Command-line interface.

Subcommands: ``prepare`` (clean + split + cache), ``run`` (execute a
suite), ``baseline`` (idle power measurement), ``report`` (comparison /
efficiency tables), ``list-models``.  Exit codes: 0 success, 1
configuration or usage error, 2 partial failures during a run.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from wattrec.energy.session import measure_idle_baseline
from wattrec.errors import WattrecError
from wattrec.harness.config import ExperimentConfig
from wattrec.harness.reports import (
    load_records,
    report_comparison,
    report_efficiency,
    write_report,
)
from wattrec.harness.runner import prepare_dataset, run_suite
from wattrec.models.registry import list_models

log = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        sys.exit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wattrec",
                     description="Energy-aware recommender benchmarking")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_prepare = sub.add_parser("prepare", help="clean datasets and cache splits")
    p_prepare.add_argument("--config", required=True)
    p_prepare.add_argument("--dataset", help="only this dataset")
    p_prepare.add_argument("--force", action="store_true",
                           help="rebuild splits even when cached")

    p_run = sub.add_parser("run", help="run the configured experiment suite")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--dataset", help="only this dataset")
    p_run.add_argument("--models", help="comma-separated subset of models")
    p_run.add_argument("--no-meter", action="store_true",
                       help="disable energy measurement")
    p_run.add_argument("--seed", type=int, help="override the global seed")
    p_run.add_argument("--out", help="override the output directory")

    p_base = sub.add_parser("baseline", help="measure idle power draw")
    p_base.add_argument("--config", required=True)
    p_base.add_argument("--duration", type=float, default=600.0,
                        help="measurement window in seconds")

    p_report = sub.add_parser("report", help="build comparison/efficiency tables")
    p_report.add_argument("--config")
    p_report.add_argument("--results", help="results TSV (defaults to <output_dir>/results.tsv)")
    p_report.add_argument("--kind", choices=["comparison", "efficiency"],
                          default="comparison")
    p_report.add_argument("--reference", help="reference model for comparison tables")
    p_report.add_argument("--value", choices=["accuracy", "energy"], default="accuracy")
    p_report.add_argument("--out", help="write the table to this file")

    sub.add_parser("list-models", help="list model names per pipeline")
    return parser


def _cmd_prepare(args) -> int:
    cfg = ExperimentConfig.from_file(args.config)
    for ds in cfg.datasets:
        if args.dataset and ds.name != args.dataset:
            continue
        prepare_dataset(cfg, ds, force=args.force)
    return 0


def _cmd_run(args) -> int:
    cfg = ExperimentConfig.from_file(args.config)
    overrides = {}
    if args.no_meter:
        overrides["meter"] = None
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out:
        overrides["output_dir"] = args.out
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    only_models = args.models.split(",") if args.models else None
    records = run_suite(cfg, only_models=only_models, only_dataset=args.dataset)
    failures = [r for r in records if not r.ok]
    for record in records:
        line = ", ".join(f"{k}={v:.4f}" for k, v in record.metrics.items())
        print(f"{record.model} on {record.dataset}: {record.status} {line}")
    if failures:
        print(f"{len(failures)} of {len(records)} runs failed", file=sys.stderr)
        return 2
    return 0


def _cmd_baseline(args) -> int:
    cfg = ExperimentConfig.from_file(args.config)
    if cfg.meter is None:
        print("error: config has no meter section", file=sys.stderr)
        return 1
    watts = measure_idle_baseline(cfg.meter, args.duration, cfg.measurements_dir)
    print(f"idle baseline: {watts:.2f} W over {args.duration:.0f} s")
    return 0


def _cmd_report(args) -> int:
    results = args.results
    if results is None:
        if args.config is None:
            print("error: report needs --results or --config", file=sys.stderr)
            return 1
        cfg = ExperimentConfig.from_file(args.config)
        results = Path(cfg.output_dir) / "results.tsv"
    frame = load_records(results)
    if args.kind == "comparison":
        if not args.reference:
            print("error: comparison report needs --reference", file=sys.stderr)
            return 1
        table, notes = report_comparison(frame, args.reference, args.value)
    else:
        table, notes = report_efficiency(frame)
    text = write_report(table, notes, args.out)
    if not args.out:
        print(text, end="")
    return 0


def _cmd_list_models(_args) -> int:
    for pipeline, names in list_models().items():
        print(f"{pipeline}:")
        for name in names:
            print(f"  {name}")
    return 0


COMMANDS = {
    "prepare": _cmd_prepare,
    "run": _cmd_run,
    "baseline": _cmd_baseline,
    "report": _cmd_report,
    "list-models": _cmd_list_models,
}


def main(argv=None) -> int:
    logging.basicConfig(
        level=logging.INFO, format="%(asctime)s %(name)s %(levelname)s %(message)s"
    )
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except WattrecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: convert data, run experiments, build reports.

Exit codes: 0 on success, 2 on validation errors (bad config, malformed
data, unknown run ids), 1 on IO or runtime errors, 130 when interrupted.
Interrupted experiments persist their partial state; re-running the same
config (with or without ``--resume``) picks up where they stopped.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .config import ExperimentConfig, config_fingerprint, parse_config
from .errors import (
    AlsimError,
    ConfigError,
    CorruptArtifactError,
    DataError,
    SpanTasksUnsupportedError,
    StoreError,
)
from .simulator import ensure_converted, run_experiment
from .tracking import (
    STATUS_SUCCESS,
    AggregateCurve,
    RunStore,
    csv_bytes_to_rows,
    rows_to_csv_bytes,
    write_band_plot,
)

logger = logging.getLogger("alsim")

STORE_ENV_VAR = "ALSIM_STORE"

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_VALIDATION = 2
EXIT_INTERRUPTED = 130


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="alsim",
        description="Benchmark pool-based active-learning query strategies "
        "by simulating the annotation loop with a perfect oracle.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser, config_required: bool) -> None:
        p.add_argument(
            "--config", required=config_required, help="path to the experiment config"
        )
        p.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="KEY.PATH=VALUE",
            help="override any config leaf (repeatable)",
        )
        p.add_argument(
            "--store",
            default=None,
            help=f"run-store root (overrides config and ${STORE_ENV_VAR})",
        )

    p_convert = sub.add_parser(
        "convert", help="ingest and convert the raw dataset (cached)"
    )
    add_common(p_convert, config_required=True)

    p_run = sub.add_parser(
        "run", help="run the full experiment: convert, seed runs, aggregate"
    )
    add_common(p_run, config_required=True)
    p_run.add_argument(
        "--resume",
        action="store_true",
        help="explicitly continue failed/interrupted runs (matching failed "
        "records are resumed either way)",
    )

    p_report = sub.add_parser(
        "report", help="export CSVs and an overlay plot for stored aggregates"
    )
    add_common(p_report, config_required=False)
    p_report.add_argument(
        "--runs", required=True, help="comma-separated aggregate run ids"
    )
    p_report.add_argument("--out", required=True, help="output directory")

    return parser


def _resolve_store(args: argparse.Namespace, cfg: ExperimentConfig | None) -> RunStore:
    if args.store:
        return RunStore(args.store)
    env = os.environ.get(STORE_ENV_VAR)
    if env:
        return RunStore(env)
    if cfg is not None:
        return RunStore(cfg.resolve_store_root())
    raise ConfigError(
        f"no run store given: pass --store, set ${STORE_ENV_VAR}, or provide --config"
    )


def _cmd_convert(args: argparse.Namespace) -> int:
    cfg = parse_config(args.config, args.overrides)
    store = _resolve_store(args, cfg)
    split = ensure_converted(cfg, store)
    print(
        f"converted corpus ready: {len(split.train)} train / {len(split.dev)} dev / "
        f"{len(split.test)} test documents, labels: {', '.join(split.label_names)}"
    )
    return EXIT_OK


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = parse_config(args.config, args.overrides)
    store = _resolve_store(args, cfg)
    if args.resume:
        logger.info("resume requested; failed or interrupted runs will continue")
    result = run_experiment(cfg, store)
    print(f"experiment fingerprint: {result.fingerprint}")
    for seed in cfg.experiment.seeds:
        if seed in result.curves:
            curve = result.curves[seed]
            final = curve.points[-1]
            print(
                f"  seed {seed}: {len(curve.points)} points, final test "
                f"macro_f1={final.test_report.macro_f1:.4f} "
                f"at {final.labeled_count} labeled docs"
            )
        else:
            print(f"  seed {seed}: FAILED ({result.failures.get(seed, 'unknown')})")
    if result.failures:
        print("experiment incomplete; rerun with --resume to continue", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"aggregate run: {result.aggregate_run_id}")
    return EXIT_OK


def _cmd_report(args: argparse.Namespace) -> int:
    cfg = parse_config(args.config, args.overrides) if args.config else None
    store = _resolve_store(args, cfg)
    run_ids = [r for r in args.runs.split(",") if r]
    if not run_ids:
        raise ConfigError("--runs: no run ids given")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    series = []
    labels_seen: dict[str, int] = {}
    for run_id in run_ids:
        record = store.get_run(run_id)
        if record.step_name != "aggregate":
            raise StoreError(f"run {run_id} is a {record.step_name} run, not an aggregate")
        if record.status != STATUS_SUCCESS:
            raise StoreError(f"run {run_id} is marked {record.status}, cannot report it")
        rows = csv_bytes_to_rows(store.artifact_path(record, "aggregate.csv").read_bytes())
        strategy = store.read_params(record).get("teacher", {}).get("strategy", run_id)
        labels_seen[strategy] = labels_seen.get(strategy, 0) + 1
        label = strategy if labels_seen[strategy] == 1 else f"{strategy} ({run_id[-6:]})"
        csv_path = out_dir / f"{run_id}.csv"
        csv_path.write_bytes(rows_to_csv_bytes(rows))
        print(f"wrote {csv_path}")
        series.append((label, AggregateCurve.from_rows(rows)))

    plot_path = out_dir / "overlay.svg"
    write_band_plot(series, "test_macro_f1", plot_path, title="strategy comparison")
    print(f"wrote {plot_path}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "convert":
            return _cmd_convert(args)
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "report":
            return _cmd_report(args)
        parser.error(f"unknown command {args.command!r}")
    except KeyboardInterrupt:
        print("interrupted; partial state persisted, rerun with --resume", file=sys.stderr)
        return EXIT_INTERRUPTED
    except (ConfigError, DataError, SpanTasksUnsupportedError, StoreError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (OSError, CorruptArtifactError, AlsimError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

"""Command line entry points: fit, transform, zero-shot, report."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import load_config
from .dsl import DslError
from .engine import run_fit, run_transform, run_zero_shot
from .io import REPORT_FILENAME, read_json
from .llm import LlmError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="elate",
        description="Evolutionary LLM-assisted feature engineering for time series.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="run the full search and persist the results")
    fit.add_argument("--config", required=True, help="key=value config file")

    transform = sub.add_parser(
        "transform", help="execute a stored feature set on a CSV"
    )
    transform.add_argument(
        "--db", required=True, help="feature set file or run output directory"
    )
    transform.add_argument("--data", required=True, help="input CSV")
    transform.add_argument("--out", required=True, help="output CSV of feature columns")
    transform.add_argument(
        "--config",
        default=None,
        help="optional config for column types; without it kinds are inferred",
    )

    zero = sub.add_parser(
        "zero-shot", help="draw k proposals from one prompt, keep the valid ones"
    )
    zero.add_argument("--config", required=True, help="key=value config file")
    zero.add_argument("-k", type=int, default=8, help="number of proposals to draw")

    report = sub.add_parser("report", help="print a stored run report")
    report.add_argument(
        "--db", required=True, help="report file or run output directory"
    )
    return parser


def _print_report(payload: dict) -> None:
    print(f"base validation RMSE: {payload['base_validation_rmse']:.6f}")
    rows = payload.get("generations", [])
    if rows:
        print("gen  val RMSE   proposed  parsefail  valfail  dead  accepted  best set")
        for row in rows:
            print(
                f"{row['generation']:>3}  {row['validation_rmse']:<9.6f}"
                f"  {row['proposed']:>8}  {row['parse_failed']:>9}"
                f"  {row['validation_failed']:>7}  {row['dead_score']:>4}"
                f"  {row['accepted']:>8}  {len(row['best_feature_names'])} features"
            )
    if payload.get("test_rmse") is not None:
        print(f"test RMSE: {payload['test_rmse']:.6f}")
        print(f"test MAE: {payload['test_mae']:.6f}")
    usage = payload.get("token_usage", {})
    print(
        "tokens: prompt={prompt_tokens} completion={completion_tokens} "
        "requests={requests}".format(**usage)
    )


def _resolve_report_path(db: str) -> Path:
    path = Path(db)
    if path.is_dir():
        return path / REPORT_FILENAME
    return path


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "fit":
            _, report = run_fit(load_config(args.config))
            _print_report(report.to_dict())
        elif args.command == "transform":
            config = load_config(args.config) if args.config else None
            table = run_transform(args.db, args.data, args.out, config)
            print(f"wrote {len(table)} rows x {len(table.columns)} columns to {args.out}")
        elif args.command == "zero-shot":
            specs, stats = run_zero_shot(load_config(args.config), args.k)
            print(
                f"kept {stats['kept']}/{stats['proposed']} proposals "
                f"(parse failures: {stats['parse_failed']}, "
                f"validation failures: {stats['validation_failed']})"
            )
            for spec in specs:
                print(f"  {spec.name}")
        else:  # report
            _print_report(read_json(_resolve_report_path(args.db)))
    except (ValueError, OSError, DslError, LlmError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command line entry point: ``xaudit <subcommand> [--config PATH] [--seed N] [--out PATH] [--format json|csv]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .audit import (
    emit_noise_table,
    emit_report,
    explain_point,
    prepare,
    report_json,
    run_audit,
)
from .config import load_config
from .errors import ConfigError, DataError
from .models import save_model

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_DATA = 4
EXIT_RUNTIME = 5


def _global_flags() -> argparse.ArgumentParser:
    # SUPPRESS lets the flags appear before or after the subcommand
    p = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    p.add_argument("--config", help="dotted key=value config file (or a JSON report to re-run)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out", help="output path")
    p.add_argument("--format", choices=("json", "csv"), help="output format")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags()
    parser = argparse.ArgumentParser(
        prog="xaudit", parents=[common],
        description="Estimate local Lipschitz constants of feature-attribution maps.")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("train", parents=[common], help="fit the configured model and save it")
    sp = sub.add_parser("explain", parents=[common], help="explain one test point with every configured method")
    sp.add_argument("--index", type=int, default=0, help="test-set row to explain")
    sp.add_argument("--model", help="use a saved model instead of training")
    for name, text in (("audit", "full robustness audit"),
                       ("noise-probe", "Gaussian-noise ratio table"),
                       ("worst-pair", "anchor / ratio-maximizing witness dumps")):
        sp = sub.add_parser(name, parents=[common], help=text)
        sp.add_argument("--model", help="use a saved model instead of training")
        sp.add_argument("--sample-size", type=int, help="override robustness.sample_size")
    return parser


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _run(args) -> int:
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "sample_size", None) is not None:
        overrides.setdefault("robustness", {})["sample_size"] = args.sample_size
    if args.command == "noise-probe":
        overrides.setdefault("robustness", {})["mode"] = "noise"
    cfg = load_config(getattr(args, "config", None), overrides)
    out = getattr(args, "out", None)
    fmt = getattr(args, "format", "json")
    model_path = getattr(args, "model", None)

    if args.command == "train":
        ctx = prepare(cfg)
        path = out or "model.xaud"
        save_model(ctx.model, path)
        print(f"saved {ctx.model.kind} model to {path}")
    elif args.command == "explain":
        _emit(json.dumps(explain_point(cfg, args.index, model_path), indent=2) + "\n", out)
    elif args.command == "audit":
        report = run_audit(cfg, model_path)
        if out:
            emit_report(report, out, fmt)
        else:
            _emit(report_json(report), None)
    elif args.command == "noise-probe":
        report = run_audit(cfg, model_path)
        if out:
            emit_noise_table(report, out, fmt)
        else:
            _emit(json.dumps({"noise_probes": report["noise_probes"]}, indent=2) + "\n", None)
    elif args.command == "worst-pair":
        report = run_audit(cfg, model_path)
        _emit(json.dumps({"worst_pairs": report["worst_pairs"],
                          "failures": report["failures"]}, indent=2) + "\n", out)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

"""Command line interface.

Subcommands: extract-ofds, inject, clean, evaluate, watch.  Flags override
values read from the key=value config file.  Exit codes: 0 on success, 1 on
usage or configuration errors, 2 on data or parse errors.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import pipeline
from .extraction import VocabularyError
from .injection import InjectionError
from .repair import RepairApplicationError
from .table import ConfigError, DataError
from .triples import ParseError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse defaults to exit code 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--context", type=Path, help="context model file")
    parser.add_argument("--data", type=Path, help="dataset CSV file")
    parser.add_argument("--config", type=Path, help="key=value config file")
    parser.add_argument("--out", type=Path, help="output directory")
    parser.add_argument("--seed", type=int, help="injection seed")
    parser.add_argument("--tolerance", type=float, help="co-location tolerance")
    parser.add_argument(
        "--repair-mode", choices=("repair", "delete"), help="repair or erase detected cells"
    )
    parser.add_argument("--poll-seconds", type=float, help="watch poll interval")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ofdclean", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_text in (
        ("extract-ofds", "list dependencies extracted from the context model"),
        ("inject", "corrupt a dataset and record the ground truth"),
        ("clean", "detect and repair errors in a dataset"),
        ("evaluate", "score findings and repairs against ground truth"),
        ("watch", "poll the context model and re-clean on change"),
    ):
        _add_common(sub.add_parser(name, help=help_text))
    return parser


def _run_config(args: argparse.Namespace) -> pipeline.RunConfig:
    file_values: dict[str, str] = {}
    if args.config is not None:
        if not args.config.exists():
            raise ConfigError(f"config file {args.config} does not exist")
        file_values = pipeline.parse_config_file(args.config.read_text(encoding="utf-8"))
    overrides = {
        "context": args.context,
        "data": args.data,
        "out": args.out,
        "seed": args.seed,
        "tolerance": args.tolerance,
        "repair-mode": args.repair_mode,
        "poll-seconds": args.poll_seconds,
    }
    return pipeline.build_run_config(file_values, overrides)


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = _run_config(args)
        if args.command == "extract-ofds":
            _, listing = pipeline.run_extract(cfg)
            print(listing, end="")
        elif args.command == "inject":
            _, truth = pipeline.run_inject(cfg)
            print(f"injected {len(truth)} cells (seed {cfg.seed}) into {cfg.out_dir}")
        elif args.command == "clean":
            result = pipeline.run_clean(cfg)
            print(
                f"{len(result.report)} findings, {len(result.plan)} repairs"
                f" written to {cfg.out_dir}"
            )
        elif args.command == "evaluate":
            evaluation = pipeline.run_evaluate(cfg)
            print(
                f"precision {evaluation.precision:.6f}"
                f" recall {evaluation.recall:.6f}"
                f" f1 {evaluation.f1:.6f}"
            )
            print(
                f"repair_recall {evaluation.repair_recall:.6f}"
                f" repair_f1 {evaluation.repair_f1:.6f}"
            )
        elif args.command == "watch":
            try:
                pipeline.watch(cfg)
            except KeyboardInterrupt:
                pass  # interrupt is the normal way to stop watching
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InjectionError as exc:
        print(f"injection error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as exc:
        print(f"context model error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except VocabularyError as exc:
        print(f"context vocabulary error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DataError, RepairApplicationError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

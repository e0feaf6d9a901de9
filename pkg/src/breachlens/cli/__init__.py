"""Command-line driver: ``breachlens <stage> --config run.json [--seed N] [--out DIR]``.

Exit codes: 0 success, 2 input error, 3 precondition or configuration error.
"""
from __future__ import annotations

import argparse
import logging
import sys

from ..errors import BreachlensError, InputError, ParseError
from . import stages
from .artifacts import output_lock
from .config import load_config
from .report import write_report

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_PRECONDITION = 3

log = logging.getLogger("breachlens")

COMMANDS = {
    "ingest": stages.run_ingest,
    "engineer": stages.run_engineer,
    "analyze": stages.run_analyze,
    "train": stages.run_train,
    "forecast": stages.run_forecast,
    "report": write_report,
}


def _seed(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("seed must be non-negative")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="breachlens", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--seed", type=_seed, default=None, help="overrides BREACHLENS_SEED and the config")
        p.add_argument("--out", default=None, help="output directory (overrides output_dir)")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, (InputError, ParseError)):
        return EXIT_INPUT
    return EXIT_PRECONDITION


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args.config, args.seed, args.out)
        with output_lock(cfg.output_dir):
            result = COMMANDS[args.command](cfg)
    except BreachlensError as exc:
        print(f"breachlens {args.command}: {exc}", file=sys.stderr)
        return exit_code_for(exc)
    log.info("%s finished: %s", args.command, result if not isinstance(result, dict) else "ok")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

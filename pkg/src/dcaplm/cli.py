"""Command-line interface.

    dcaplm fit      --config run.json [--seed S] [--threads T] [--out DIR]
    dcaplm test     --config run.json --model DIR/model.json [...]
    dcaplm simulate --config grid.json [...]

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import sys

from .errors import ConfigError, DataError, DcaplmError, NumericalError
from .pipeline import parse_config, run_pipeline, run_simulation, run_tests_from_model

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4

log = logging.getLogger("dcaplm")


def _u64(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must lie in [0, 2^64)")
    return v


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("threads must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    # argparse exits with status 2 on usage errors, the same code as a config error
    p = argparse.ArgumentParser(prog="dcaplm", description="Divide-and-conquer partially linear additive models.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "fit": "fit all groups, aggregate, boost, test and write artifacts",
        "simulate": "run a Monte Carlo grid and write report.csv",
        "test": "re-run the tests on saved fits",
    }
    for name in ("fit", "simulate", "test"):
        sp = sub.add_parser(name, help=helps[name])
        sp.add_argument("--config", required=True, help="JSON configuration file")
        sp.add_argument("--seed", type=_u64, default=None, help="override the config seed")
        sp.add_argument("--threads", type=_positive, default=None, help="worker threads")
        sp.add_argument("--out", default=None, help="output directory")
        if name == "test":
            sp.add_argument("--model", default=None, help="model.json written by 'fit'")
    return p


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, DataError):
        return EXIT_DATA
    if isinstance(exc, NumericalError):
        return EXIT_NUMERICAL
    return getattr(exc, "exit_code", 1)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = parse_config(args.config)
        kw = {"seed": args.seed, "threads": args.threads, "out": args.out}
        if args.command == "fit":
            manifest = run_pipeline(config, **kw)
        elif args.command == "simulate":
            manifest = run_simulation(config, **kw)
        else:
            manifest = run_tests_from_model(config, model=args.model, **kw)
    except DcaplmError as exc:
        print(f"dcaplm: error: {exc}", file=sys.stderr)
        return exit_code_for(exc)
    log.info("wrote %s", ", ".join(manifest["artifacts"]))
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())

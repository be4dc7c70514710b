"""
ChoiMap - Command Line Entry Point

Exact dynamical maps of small fermionic open systems: chain coefficients,
map extraction, predictions from stored maps, Landauer–Büttiker currents
and validation runs.
"""

import argparse
import logging
import sys
from datetime import datetime

from src.core import pipeline
from src.services.systems import InitialState
from src.storage.bundle import LoadedBundle
from src.storage.models import Engine, load_config, validate_config
from src.utils.errors import ChoiMapError, ConfigError
from src.utils.logger import setup_logging

# Setup logging
setup_logging()
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_LIBRARY_ERROR = 2
EXIT_VALIDATION_FAILED = 3

COMMANDS = ("chain-coeffs", "extract", "predict", "lb", "validate")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="choimap", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="run configuration (YAML)")
        p.add_argument("--preset", help="preset name from config/presets")
        p.add_argument("--out", help="output directory")
        p.add_argument("--engine", choices=[e.value for e in Engine])
        p.add_argument("--threads", type=int)
        if name == "predict":
            p.add_argument("bundle", help="bundle directory written by 'extract'")
            p.add_argument("--initial-state", choices=[s.value for s in InitialState])
    return parser


def resolve_run(args):
    overrides = {"engine": args.engine, "threads": args.threads}
    if args.command == "predict" and not (args.config or args.preset):
        data = LoadedBundle(args.bundle).config
        data.update({k: v for k, v in overrides.items() if v is not None})
        return validate_config(data)
    if not (args.config or args.preset):
        raise ConfigError("Give --config and/or --preset")
    return load_config(args.config, args.preset, overrides)


def run_command(args) -> int:
    run = resolve_run(args)
    logger.info(f"Preset: {run.preset or '-'}, engine: {run.engine.value}, threads: {run.threads}")

    if args.command == "chain-coeffs":
        root = pipeline.run_chain_coeffs(run, args.out)
    elif args.command == "extract":
        root = pipeline.run_extract(run, args.out)
    elif args.command == "predict":
        state = InitialState(args.initial_state) if args.initial_state else None
        root = pipeline.run_predict(run, args.bundle, args.out, state)
    elif args.command == "lb":
        root = pipeline.run_lb(run, args.out)
    else:
        passed, root, checks = pipeline.run_validate(run, args.out)
        failed = [name for name, check in checks.items() if not check["passed"]]
        if not passed:
            logger.error(f"Validation failed: {', '.join(failed)}")
            logger.info(f"Results: {root}")
            return EXIT_VALIDATION_FAILED
    logger.info(f"Results: {root}")
    return EXIT_OK


def main(argv=None) -> int:
    """Parse arguments and run one subcommand; returns the process exit code"""
    args = build_parser().parse_args(argv)

    logger.info("=" * 70)
    logger.info(f"CHOIMAP {args.command.upper()} - STARTING")
    logger.info("=" * 70)
    logger.info(f"Python version: {sys.version.split()[0]}")
    logger.info(f"Current time: {datetime.now().isoformat()}")

    try:
        code = run_command(args)
    except ChoiMapError as e:
        logger.error(f"{type(e).__name__}: {e}", exc_info=True)
        code = EXIT_LIBRARY_ERROR
    except Exception as e:
        logger.error(f"Unexpected error: {e}", exc_info=True)
        code = EXIT_UNEXPECTED

    logger.info("=" * 70)
    logger.info(f"CHOIMAP {args.command.upper()} - {'DONE' if code == EXIT_OK else f'EXIT {code}'}")
    logger.info("=" * 70)
    return code


if __name__ == "__main__":
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        logger.info("Stopped by user")
        sys.exit(EXIT_UNEXPECTED)

"""Command-line entry point for thermolimit.

Initializes logging in two phases (defaults then config-driven), parses
the subcommand and runs it. Failures are written to stderr as a YAML
error report and mapped onto the exit code of their category.

Subcommands:
    <kind> --spec FILE: Run an experiment of that kind (sample, stats,
        moments, tails, geometry, tiling, energy, ergodic, thermo, gap).
    run --spec FILE: Run whatever kind the spec (or manifest) names.
    validate --spec FILE: Report every violation without running.
    diagnose: Library versions and host resources.

Key functions:
    main: Parse arguments, dispatch, return the exit status.
    run: Console-script wrapper around main.
"""

import argparse
import os
import sys
from pathlib import Path
from typing import List, Optional

import structlog
import yaml

from .exceptions import SpecValidationError, ThermolimitError
from .logging_config import setup_logging


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--spec", type=Path, required=True, help="Experiment spec (YAML)")
    parser.add_argument("--out", type=Path, default=None, help="Output directory")
    parser.add_argument("--seed", type=int, default=None, help="Override the master seed")
    parser.add_argument("--threads", type=int, default=None, help="Worker threads")


def build_parser() -> argparse.ArgumentParser:
    from .harness.models import EXPERIMENT_KINDS

    parser = argparse.ArgumentParser(
        prog="thermolimit",
        description="Monte Carlo laboratory for random nuclear configurations",
    )
    parser.add_argument(
        "--debug", action="store_true",
        help="Enable DEBUG log level (overrides config)",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in EXPERIMENT_KINDS:
        _add_run_flags(sub.add_parser(kind, help=f"Run a {kind} experiment"))
    _add_run_flags(sub.add_parser("run", help="Run the experiment a spec names"))
    validate = sub.add_parser("validate", help="Validate a spec without running it")
    validate.add_argument("--spec", type=Path, required=True)
    sub.add_parser("diagnose", help="Report library versions and host resources")
    return parser


def _emit(data: dict, stream=sys.stdout) -> None:
    stream.write(yaml.safe_dump(data, sort_keys=False))


def _validate(path: Path) -> int:
    from .harness.models import validate_spec
    from .harness.outputs import read_spec_file

    _, violations = validate_spec(read_spec_file(path))
    if violations:
        raise SpecValidationError("experiment spec is invalid", violations=violations,
                                  path=str(path))
    _emit({"status": "ok", "spec": str(path)})
    return 0


def _diagnose() -> int:
    from .diagnostics import run_all_checks

    results = run_all_checks()
    _emit({name: {"ok": ok, "detail": detail, **({"hint": hint} if hint else {})}
           for name, (ok, detail, hint) in results.items()})
    return 0 if all(ok for ok, _, _ in results.values()) else 1


def _run(args: argparse.Namespace) -> int:
    from .harness.runner import run_from_file

    kind = None if args.command == "run" else args.command
    manifest = run_from_file(args.spec, args.out, args.threads, {"seed": args.seed}, kind)
    _emit({
        "status": "ok",
        "kind": manifest.kind,
        "outputs": manifest.outputs,
        "summary": manifest.summary,
    })
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    """Run the CLI and return the process exit status."""
    args = build_parser().parse_args(argv)

    if args.debug:
        os.environ["THERMOLIMIT_LOG_LEVEL"] = "DEBUG"

    # Phase 1: defaults, cache_logger_on_first_use=False
    setup_logging()
    logger = structlog.get_logger("thermolimit.harness")

    from . import __version__
    from .config import get_config

    config = get_config()
    config.validate()

    # Phase 2: reconfigure with real config
    setup_logging(config)
    logger.debug("thermolimit_starting", version=__version__, command=args.command)

    from .harness.outputs import error_report

    try:
        if args.command == "validate":
            return _validate(args.spec)
        if args.command == "diagnose":
            return _diagnose()
        return _run(args)
    except ThermolimitError as exc:
        logger.error("command_failed", command=args.command, error=str(exc),
                     category=exc.category.value)
        sys.stderr.write(error_report(exc))
        return exc.exit_code
    except (ArithmeticError, ValueError, MemoryError) as exc:
        logger.error("command_failed", command=args.command, error=str(exc))
        sys.stderr.write(error_report(exc))
        return 3


def run() -> None:
    """Synchronous entry point for the ``thermolimit`` console script."""
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        sys.exit(130)


if __name__ == "__main__":
    run()

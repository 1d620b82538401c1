"""plapmax command-line entry point.

    plapmax [--log-level LEVEL] [--json-logs] {eigen,sweep,branch,picone} CONFIG
            [--seed N] [--out DIR]

Exit codes: 0 success, 1 internal error, 2 solver non-convergence,
3 precondition violation, 4 hypothesis violation.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import structlog

from plapmax import __version__
from plapmax.cli.commands import COMMANDS
from plapmax.config import get_settings
from plapmax.errors import build_error_response, exit_code_for
from plapmax.experiments.config import load_experiment
from plapmax.observability.logging_config import bind_run_context, configure_logging

logger = structlog.get_logger(__name__)

_HELP = {
    "eigen": "principal eigenvalues and eigenfunctions of the weight",
    "sweep": "maximum-principle sweep over a lambda grid",
    "branch": "one-sign branches from the principal eigenvalue and their crossings",
    "picone": "randomized Picone gap trials",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plapmax",
        description="p-Laplacian with indefinite weight: eigenvalues, maximum principle, "
        "one-sign branches",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    parser.add_argument("--json-logs", action="store_true", help="one JSON object per log event")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("config", type=Path, help="experiment YAML file")
    common.add_argument("--seed", type=int, default=None, help="override the experiment seed")
    common.add_argument("--out", type=Path, default=None, help="output directory")

    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=_HELP[name])
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    settings = get_settings()
    log_level = (args.log_level or settings.logging.level).upper()
    configure_logging(
        json_output=args.json_logs or settings.logging.json_output, log_level=log_level
    )
    log = logger.bind(command=args.command)

    try:
        config = load_experiment(args.config)
        if args.seed is not None:
            config = config.model_copy(update={"seed": args.seed})
        bind_run_context(command=args.command, experiment=args.config.name, seed=config.seed)
        out = args.out or config.output_dir or settings.output_dir
        log.info("command_started", config=str(args.config), out=str(out))
        code = COMMANDS[args.command](config, Path(out))
    except Exception as exc:
        code = exit_code_for(exc)
        envelope = build_error_response(
            exc, command=args.command, include_trace=code == 1 and log_level == "DEBUG"
        )
        print(envelope.model_dump_json(), file=sys.stderr)
        return code

    log.info("command_finished", exit_code=code)
    return code


def run() -> None:
    sys.exit(main())

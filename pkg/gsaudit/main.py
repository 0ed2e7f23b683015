"""
GSA Audit - command line entry point
"""

import argparse
import logging
import sys
from typing import Optional, Sequence

from pydantic import ValidationError

from gsaudit import __version__
from gsaudit.commands import audit, report, simulate
from gsaudit.utils.config import settings
from gsaudit.utils.exceptions import AuditError, CorpusError, InvalidChoiceOrder, InvalidRunConfig, SimulationError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_VALIDATION = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gsaudit",
        description="Quantify how far gene set analysis results move when analytical choices are tuned",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", dest="log_level", default=None, help=f"Default {settings.LOG_LEVEL}")
    subparsers = parser.add_subparsers(dest="command", required=True)

    # Include commands
    audit.register(subparsers)
    simulate.register(subparsers)
    report.register(subparsers)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=(args.log_level or settings.LOG_LEVEL).upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.handler(args)
    except (ValidationError, CorpusError, SimulationError, InvalidRunConfig, InvalidChoiceOrder) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except AuditError as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

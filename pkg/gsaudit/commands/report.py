"""
Report commands for GSA Audit
"""

import argparse
import logging
import sys
from pathlib import Path

from gsaudit.services.study import load_report, load_trace, plot_data, render_trace

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    report = subparsers.add_parser("report", help="Export data from finished runs")
    commands = report.add_subparsers(dest="report_command", required=True)

    plot = commands.add_parser("plot-data", help="Paired default/optimised values as CSV")
    plot.add_argument("--report", type=Path, required=True, help="report.json of a finished run")
    plot.add_argument("--out", type=Path, help="CSV path (standard output when omitted)")
    plot.set_defaults(handler=cmd_plot_data)

    trace = commands.add_parser("trace", help="Step diagram of one optimisation trace")
    trace.add_argument("--trace", type=Path, required=True)
    trace.set_defaults(handler=cmd_trace)


def cmd_plot_data(args: argparse.Namespace) -> int:
    text = plot_data(load_report(args.report)).to_csv(index=False, lineterminator="\n")
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.write_text(text, encoding="utf-8")
        logger.info(f"Plot data written to {args.out}")
    return 0


def cmd_trace(args: argparse.Namespace) -> int:
    sys.stdout.write(render_trace(load_trace(args.trace)) + "\n")
    return 0

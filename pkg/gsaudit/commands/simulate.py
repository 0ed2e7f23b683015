"""
Simulate command for GSA Audit
"""

import argparse
import logging
from pathlib import Path

from gsaudit.schemas.run_config import SimSpec
from gsaudit.services.synthdata import simulate_corpus, write_corpus
from gsaudit.utils.exceptions import InvalidRunConfig

logger = logging.getLogger(__name__)


def _pair(value: str):
    parts = value.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected two comma-separated integers, got {value!r}")
    return int(parts[0]), int(parts[1])


def register(subparsers) -> None:
    parser = subparsers.add_parser("simulate", help="Write a seeded synthetic corpus")
    parser.add_argument("--genes", type=int, default=2000)
    parser.add_argument("--samples", type=_pair, default=(10, 10), help="Group sizes, e.g. 10,10")
    parser.add_argument("--base-mean", dest="base_mean", type=float, default=100.0)
    parser.add_argument("--dispersion", type=float, default=0.1)
    parser.add_argument("--correlation", dest="within_set_correlation", type=float, default=0.0)
    parser.add_argument("--de-fraction", dest="de_fraction", type=float, default=0.0)
    parser.add_argument("--lfc", type=float, default=0.0)
    parser.add_argument("--sets", dest="n_sets", type=int, default=0, help="Number of random gene sets per collection")
    parser.add_argument("--set-size", dest="set_size", type=_pair, default=(15, 60))
    parser.add_argument("--enriched-sets", dest="enriched_sets", type=int, default=0)
    parser.add_argument("--duplicate-fraction", dest="duplicate_fraction", type=float, default=0.0)
    parser.add_argument("--no-lengths", dest="with_lengths", action="store_false")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out", type=Path, required=True)
    parser.set_defaults(handler=cmd_simulate)


def cmd_simulate(args: argparse.Namespace) -> int:
    if args.seed is None:
        raise InvalidRunConfig("simulate needs --seed")
    spec = SimSpec(
        genes=args.genes, samples=args.samples, base_mean=args.base_mean, dispersion=args.dispersion,
        within_set_correlation=args.within_set_correlation, de_fraction=args.de_fraction, lfc=args.lfc,
        seed=args.seed, n_sets=args.n_sets, set_size=args.set_size, enriched_sets=args.enriched_sets,
        duplicate_fraction=args.duplicate_fraction, with_lengths=args.with_lengths,
    )
    written = write_corpus(simulate_corpus(spec), args.out)
    for key, path in written.items():
        logger.info(f"{key}: {path}")
    return 0

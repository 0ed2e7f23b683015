"""
Audit commands for GSA Audit
`audit run` optimises a single setting, `audit grid` the whole study grid
"""

import argparse
import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional

from gsaudit.models.choices import GoalKind
from gsaudit.schemas.run_config import RunConfig
from gsaudit.services import corpus
from gsaudit.services.multiverse import EngineOptions, StudyInputs
from gsaudit.services.study import StudyPlan, run_grid, write_artifacts
from gsaudit.utils.config import settings
from gsaudit.utils.exceptions import InvalidRunConfig

logger = logging.getLogger(__name__)

# flag dest -> RunConfig key
FLAG_KEYS = (
    "counts", "labels", "collection", "alt_collection", "id_map", "lengths", "engines", "goals", "targets",
    "permutations", "include_true_labels", "min_hamming", "seed", "engine_permutations", "goseq_resamples",
    "min_set_size", "max_set_size", "threads", "global_gap", "out",
)


def _csv(value: str):
    return [v.strip() for v in value.split(",") if v.strip()]


def _add_shared(parser: argparse.ArgumentParser) -> None:
    # every default is None so only flags actually given take part in the merge
    parser.add_argument("--config", type=Path, help="JSON study manifest; its keys win over flags")
    parser.add_argument("--counts", type=Path)
    parser.add_argument("--labels", type=Path)
    parser.add_argument("--collection", type=Path)
    parser.add_argument("--alt-collection", dest="alt_collection", type=Path)
    parser.add_argument("--id-map", dest="id_map", type=Path)
    parser.add_argument("--lengths", type=Path)
    parser.add_argument("--target-set", dest="targets", action="append")
    parser.add_argument("--permutations", type=int, help="Number of permuted labelings")
    parser.add_argument("--no-true-labels", dest="include_true_labels", action="store_const", const=False)
    parser.add_argument("--min-hamming", dest="min_hamming", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--engine-permutations", dest="engine_permutations", type=int)
    parser.add_argument("--goseq-resamples", dest="goseq_resamples", type=int)
    parser.add_argument("--min-set-size", dest="min_set_size", type=int)
    parser.add_argument("--max-set-size", dest="max_set_size", type=int)
    parser.add_argument("--threads", type=int)
    parser.add_argument("--out", type=Path)


def register(subparsers) -> None:
    audit = subparsers.add_parser("audit", help="Run over-optimism audits")
    commands = audit.add_subparsers(dest="audit_command", required=True)

    grid = commands.add_parser("grid", help="Optimise every goal x labeling x engine x target setting")
    _add_shared(grid)
    grid.add_argument("--engines", type=_csv)
    grid.add_argument("--goals", type=_csv)
    grid.add_argument("--global-gap", dest="global_gap", action="store_const", const=True)
    grid.set_defaults(handler=cmd_grid)

    run = commands.add_parser("run", help="Optimise a single setting")
    _add_shared(run)
    run.add_argument("--engine", dest="engines", type=lambda v: [v])
    run.add_argument("--goal", dest="goals", type=lambda v: [v])
    run.add_argument("--labeling", default="true", help="'true' or a permutation index (1, 2, ...)")
    run.add_argument("--global-gap", dest="global_gap", action="store_const", const=True)
    run.set_defaults(handler=cmd_run)


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Merge flags with the optional JSON manifest; the manifest wins on conflicts"""
    flags: Dict[str, Any] = {k: getattr(args, k) for k in FLAG_KEYS if getattr(args, k, None) is not None}
    merged: Dict[str, Any] = dict(flags)
    if args.config is not None:
        try:
            manifest = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise InvalidRunConfig(f"Cannot read config file {args.config}: {e}")
        if not isinstance(manifest, dict):
            raise InvalidRunConfig(f"Config file {args.config} must hold a JSON object")
        for key, value in manifest.items():
            if key in flags and str(flags[key]) != str(value):
                logger.warning(f"Config file value for '{key}' ({value!r}) overrides flag ({flags[key]!r})")
            merged[key] = value
    if "seed" not in merged:
        raise InvalidRunConfig("A master seed is required (--seed or 'seed' in the config file)")
    merged.setdefault("threads", settings.AUDIT_THREADS)
    return RunConfig.model_validate(merged)


def load_inputs(cfg: RunConfig) -> StudyInputs:
    matrix = corpus.parse_count_matrix(cfg.counts)
    if cfg.lengths is not None:
        matrix = corpus.attach_lengths(matrix, corpus.parse_lengths(cfg.lengths))
    labels = corpus.parse_labels(cfg.labels, matrix)
    collections = [corpus.parse_gene_sets(cfg.collection)]
    if cfg.alt_collection is not None:
        collections.append(corpus.parse_gene_sets(cfg.alt_collection))
    if len({c.name for c in collections}) < len(collections):
        raise InvalidRunConfig("Collection files must have distinct names")
    id_map = corpus.parse_id_map(cfg.id_map) if cfg.id_map is not None else None
    return StudyInputs(matrix, labels, tuple(collections), id_map)


def build_plan(cfg: RunConfig, only_labeling: Optional[int] = None) -> StudyPlan:
    base = EngineOptions()
    options = EngineOptions(
        gsea_permutations=cfg.engine_permutations or base.gsea_permutations,
        padog_permutations=cfg.engine_permutations or base.padog_permutations,
        goseq_resamples=cfg.goseq_resamples or base.goseq_resamples,
        min_set_size=cfg.min_set_size or base.min_set_size,
        max_set_size=cfg.max_set_size or base.max_set_size,
    )
    return StudyPlan(
        engines=tuple(cfg.engines), goals=tuple(cfg.goals), targets=tuple(cfg.targets),
        permutations=cfg.permutations, include_true_labels=cfg.include_true_labels, min_hamming=cfg.min_hamming,
        global_gap=cfg.global_gap, only_labeling=only_labeling,
        choice_order={k: tuple(v) for k, v in cfg.choice_order.items()}, options=options,
    )


def _manifest(cfg: RunConfig) -> Dict[str, Any]:
    # thread count and output location never change results
    return cfg.model_dump(mode="json", exclude={"threads", "out"})


def _execute(cfg: RunConfig, only_labeling: Optional[int] = None) -> int:
    inputs = load_inputs(cfg)
    plan = build_plan(cfg, only_labeling)
    report = run_grid(plan, inputs, cfg.seed, threads=cfg.threads, manifest=_manifest(cfg))
    write_artifacts(report, cfg.out)
    failed = sum(1 for r in report.records if r.failed)
    if failed:
        logger.warning(f"{failed}/{len(report.records)} settings failed; see report.json")
    return 0


def cmd_grid(args: argparse.Namespace) -> int:
    return _execute(resolve_config(args))


def cmd_run(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    if len(cfg.engines) != 1 or len(cfg.goals) != 1:
        raise InvalidRunConfig("audit run takes exactly one --engine and one --goal")
    if cfg.goals[0] is not GoalKind.MAX_DEGS and len(cfg.targets) != 1:
        raise InvalidRunConfig("audit run takes exactly one --target-set for this goal")
    if args.labeling == "true":
        index = 0
    else:
        try:
            index = int(args.labeling)
        except ValueError:
            raise InvalidRunConfig(f"--labeling must be 'true' or a permutation index, got {args.labeling!r}")
        if index < 1:
            raise InvalidRunConfig("Permutation indices start at 1")
    return _execute(cfg, only_labeling=index)

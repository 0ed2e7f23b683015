"""
Study service for GSA Audit
Label permutations, the settings grid (goal x labeling x engine x target),
summaries, plot data and artifact writing
"""

import logging
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import comb
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from gsaudit import __version__
from gsaudit.models.choices import Goal, GoalKind
from gsaudit.models.corpus import ConditionLabels
from gsaudit.schemas.report import ReportMeta, SettingRecord, StudyReport, SummaryRow
from gsaudit.schemas.trace import OptimizationTrace
from gsaudit.services.multiverse import (
    Capabilities, EngineOptions, PipelineEvaluator, StudyInputs, build_graph, exhaustive_optimize, stepwise_optimize,
)
from gsaudit.utils.config import settings
from gsaudit.utils.exceptions import AuditError, EmptyReport, InsufficientPermutations, SearchSpaceTooLarge
from gsaudit.utils.seeding import derive_seed, rng_for

logger = logging.getLogger(__name__)

PLOT_COLUMNS = ["engine", "goal", "labeling", "target", "default_value", "optimized_value"]


@dataclass(frozen=True)
class Labeling:
    """True labels (index 0) or the index-th permutation of them"""
    index: int
    labels: ConditionLabels

    @property
    def kind(self) -> str:
        return "true" if self.index == 0 else "permutation"

    @property
    def name(self) -> str:
        return "true" if self.index == 0 else f"perm_{self.index:02d}"


def _available_arrangements(n_first: int, n_second: int, min_hamming: int) -> int:
    # swapping j samples between groups moves the assignment by Hamming distance 2j
    return sum(comb(n_first, j) * comb(n_second, j)
               for j in range(1, min(n_first, n_second) + 1) if 2 * j >= min_hamming)


def generate_permutations(labels: ConditionLabels, count: int, seed: int, min_hamming: int = 0) -> List[Labeling]:
    """Distinct label arrangements with unchanged group sizes, never the true one"""
    if count < 1:
        raise ValueError("Permutation count must be >= 1")
    n_first, n_second = labels.group_sizes
    available = _available_arrangements(n_first, n_second, min_hamming)
    if available < count:
        raise InsufficientPermutations(count, available)
    truth = labels.second_group
    rng = rng_for(seed, "permutations")
    seen = {truth.tobytes()}
    drawn: List[Labeling] = []
    while len(drawn) < count:
        mask = rng.permutation(truth)
        key = mask.tobytes()
        if key in seen or int(np.count_nonzero(mask != truth)) < min_hamming:
            continue
        seen.add(key)
        drawn.append(Labeling(len(drawn) + 1, labels.from_mask(mask)))
    return drawn


@dataclass(frozen=True)
class StudyPlan:
    """What to run: the grid axes plus engine options"""
    engines: Tuple[str, ...]
    goals: Tuple[GoalKind, ...] = (GoalKind.MAX_DEGS,)
    targets: Tuple[str, ...] = ()
    permutations: int = 10
    include_true_labels: bool = True
    min_hamming: int = 0
    global_gap: bool = False
    only_labeling: Optional[int] = None
    choice_order: Dict[str, Tuple[str, ...]] = field(default_factory=dict)
    options: EngineOptions = field(default_factory=EngineOptions)

    def describe(self) -> Dict:
        return {
            "engines": list(self.engines),
            "goals": [g.value for g in self.goals],
            "targets": list(self.targets),
            "permutations": self.permutations,
            "include_true_labels": self.include_true_labels,
            "min_hamming": self.min_hamming,
            "global_gap": self.global_gap,
            "only_labeling": self.only_labeling,
            "choice_order": {k: list(v) for k, v in sorted(self.choice_order.items())},
            "options": {
                "gsea_permutations": self.options.gsea_permutations,
                "padog_permutations": self.options.padog_permutations,
                "goseq_resamples": self.options.goseq_resamples,
                "min_set_size": self.options.min_set_size,
                "max_set_size": self.options.max_set_size,
                "de_alpha": self.options.de_alpha,
            },
        }


def setting_key(goal: Goal, engine: str, labeling: Labeling) -> str:
    return f"{goal.describe()}|{engine}|{labeling.name}"


def setting_seed(master_seed: int, goal: Goal, engine: str, labeling_index: int) -> int:
    return derive_seed(master_seed, goal.kind.value, engine, labeling_index, goal.target or "")


def run_setting(goal: Goal, engine: str, labeling: Labeling, inputs: StudyInputs, seed: int,
                options: Optional[EngineOptions] = None, order: Optional[Sequence[str]] = None,
                global_gap: bool = False) -> SettingRecord:
    """Stepwise optimisation of one setting on the given labeling"""
    sub_seed = setting_seed(seed, goal, engine, labeling.index)
    graph = build_graph(engine, goal, inputs.capabilities, order)
    evaluator = PipelineEvaluator(inputs.with_labels(labeling.labels), graph, sub_seed, options)
    trace = stepwise_optimize(graph, evaluator)
    global_objective = None
    if global_gap:
        try:
            global_objective = exhaustive_optimize(graph, evaluator).objective
        except SearchSpaceTooLarge as e:
            logger.warning(f"Skipping global optimum for {setting_key(goal, engine, labeling)}: {e}")
    logger.info(f"{setting_key(goal, engine, labeling)}: {trace.default_objective:g} -> {trace.final_objective:g}")
    return SettingRecord(
        key=setting_key(goal, engine, labeling), goal=goal.kind.value, engine=engine,
        labeling=labeling.name, labeling_index=labeling.index, target=goal.target, seed=sub_seed,
        default_objective=trace.default_objective, final_objective=trace.final_objective,
        global_objective=global_objective, improved=goal.better(trace.final_objective, trace.default_objective),
        trace=trace,
    )


def _settings_grid(plan: StudyPlan, labelings: Sequence[Labeling]) -> List[Tuple[Goal, str, Labeling]]:
    grid = []
    for kind in plan.goals:
        goals = [Goal(kind)] if kind is GoalKind.MAX_DEGS else [Goal(kind, t) for t in plan.targets]
        for labeling in labelings:
            for engine in plan.engines:
                for goal in goals:
                    grid.append((goal, engine, labeling))
    return grid


def _safe(token: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]", "_", token)


def trace_file_name(index: int, record: SettingRecord) -> str:
    parts = [f"trace_{index:04d}", record.engine, record.goal, record.labeling]
    if record.target:
        parts.append(_safe(record.target))
    return "_".join(parts) + ".json"


def summarize(records: Sequence[SettingRecord]) -> List[SummaryRow]:
    """Per engine/goal improvement counts, median and max improvement, 0 -> >0 events on permuted labels"""
    groups: Dict[Tuple[str, str], List[SettingRecord]] = {}
    for record in records:
        groups.setdefault((record.engine, record.goal), []).append(record)
    rows = []
    for (engine, goal_value), members in groups.items():
        kind = GoalKind(goal_value)
        ok = [r for r in members if not r.failed]
        gains = [Goal(kind, r.target).improvement(r.final_objective, r.default_objective) for r in ok]
        zero_to_positive = None
        if kind is GoalKind.MAX_DEGS:
            zero_to_positive = sum(1 for r in ok if r.is_permuted and r.default_objective == 0 and r.final_objective > 0)
        rows.append(SummaryRow(
            engine=engine, goal=goal_value, settings=len(members), improved=sum(1 for r in ok if r.improved),
            failed=len(members) - len(ok),
            median_improvement=float(np.median(gains)) if gains else 0.0,
            max_improvement=float(np.max(gains)) if gains else 0.0,
            zero_to_positive=zero_to_positive,
        ))
    return rows


def check_choice_orders(plan: StudyPlan, capabilities: Capabilities) -> None:
    """Build every reordered graph of the plan once, so a bad ordering fails before any setting runs"""
    for engine, order in sorted(plan.choice_order.items()):
        for kind in plan.goals:
            goals = [Goal(kind)] if kind is GoalKind.MAX_DEGS else [Goal(kind, t) for t in plan.targets[:1]]
            for goal in goals:
                build_graph(engine, goal, capabilities, order)


def run_grid(plan: StudyPlan, inputs: StudyInputs, seed: int, threads: int = None,
             manifest: Optional[Dict] = None) -> StudyReport:
    """Every setting of the plan; records come back in canonical grid order whatever the pool size"""
    threads = settings.AUDIT_THREADS if threads is None else threads
    check_choice_orders(plan, inputs.capabilities)
    labelings: List[Labeling] = []
    if plan.include_true_labels or plan.only_labeling == 0:
        labelings.append(Labeling(0, inputs.labels))
    count = plan.permutations if plan.only_labeling is None else plan.only_labeling
    if count and plan.engines:
        labelings += generate_permutations(inputs.labels, count, seed, plan.min_hamming)
    if plan.only_labeling is not None:
        labelings = [l for l in labelings if l.index == plan.only_labeling]
    grid = _settings_grid(plan, labelings)
    logger.info(f"Running {len(grid)} settings on {threads} thread(s)")

    def run_one(item: Tuple[Goal, str, Labeling]) -> SettingRecord:
        goal, engine, labeling = item
        try:
            return run_setting(goal, engine, labeling, inputs, seed, plan.options,
                               plan.choice_order.get(engine), plan.global_gap)
        except AuditError as e:
            logger.error(f"Setting {setting_key(goal, engine, labeling)} failed: {e}")
            return SettingRecord(
                key=setting_key(goal, engine, labeling), goal=goal.kind.value, engine=engine,
                labeling=labeling.name, labeling_index=labeling.index, target=goal.target,
                seed=setting_seed(seed, goal, engine, labeling.index),
                default_objective=goal.worst, final_objective=goal.worst, failed=True,
                error=f"{type(e).__name__}: {e}",
            )

    if threads > 1 and len(grid) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(run_one, grid))
    else:
        records = [run_one(item) for item in grid]

    for index, record in enumerate(records, start=1):
        if record.trace is not None:
            record.trace_file = trace_file_name(index, record)

    config = plan.describe()
    if manifest:
        config["inputs"] = manifest
    meta = ReportMeta(tool=settings.APP_NAME, version=__version__, seed=seed, config=config,
                      settings={"DE_ALPHA": settings.DE_ALPHA, "BH_THRESHOLD": settings.BH_THRESHOLD,
                                "GSEA_Q_THRESHOLD": settings.GSEA_Q_THRESHOLD,
                                "MODERATION_PRIOR_DF": settings.MODERATION_PRIOR_DF,
                                "SEARCH_SPACE_CAP": settings.SEARCH_SPACE_CAP})
    return StudyReport(meta=meta, records=records, summary=summarize(records))


def plot_data(report: StudyReport) -> pd.DataFrame:
    """Paired default vs optimised value per setting"""
    if not report.records:
        raise EmptyReport()
    return pd.DataFrame(
        [[r.engine, r.goal, r.labeling, r.target or "", r.default_objective, r.final_objective]
         for r in report.records],
        columns=PLOT_COLUMNS,
    )


def summary_frame(report: StudyReport) -> pd.DataFrame:
    columns = list(SummaryRow.model_fields)
    return pd.DataFrame([row.model_dump() for row in report.summary], columns=columns)


def render_trace(trace: OptimizationTrace) -> str:
    """Text step diagram: adopted option and current optimum after each step"""
    lines = [f"{trace.engine} / {trace.goal}", f"  default{'':<28}{trace.default_objective:g}"]
    for number, step in enumerate(trace.steps, start=1):
        tried = ", ".join(f"{e.option}={'failed' if e.failed else format(e.objective, 'g')}" for e in step.evaluated)
        marker = "*" if step.improved else " "
        change = f"{step.incumbent} -> {step.adopted}" if step.improved else step.adopted
        lines.append(f"{marker} {number}. {step.choice:<12} {change:<22}{step.objective_after:g}    [{tried}]")
    lines.append(f"  final{'':<30}{trace.final_objective:g}")
    return "\n".join(lines)


# Artifacts

def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _write_frame(frame: pd.DataFrame, path: Path) -> None:
    _atomic_write(path, frame.to_csv(index=False, lineterminator="\n"))


def write_artifacts(report: StudyReport, out_dir) -> Path:
    """report.json, summary.csv, plot_data.csv and one trace file per setting"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for record in report.records:
        if record.trace is not None and record.trace_file:
            _atomic_write(out_dir / record.trace_file, record.trace.model_dump_json(indent=2) + "\n")
    _write_frame(summary_frame(report), out_dir / "summary.csv")
    frame = plot_data(report) if report.records else pd.DataFrame(columns=PLOT_COLUMNS)
    _write_frame(frame, out_dir / "plot_data.csv")
    _atomic_write(out_dir / "report.json", report.model_dump_json(indent=2) + "\n")
    logger.info(f"Wrote {len(report.records)} settings to {out_dir}")
    return out_dir


def load_report(path) -> StudyReport:
    return StudyReport.model_validate_json(Path(path).read_text(encoding="utf-8"))


def load_trace(path) -> OptimizationTrace:
    return OptimizationTrace.model_validate_json(Path(path).read_text(encoding="utf-8"))

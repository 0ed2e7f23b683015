"""
Multiverse service for GSA Audit
Per-engine choice graphs, the memoised pipeline evaluator and the stepwise
and exhaustive optimisers
"""

import logging
import threading
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Protocol, Sequence, Tuple

from gsaudit.models.choices import ChoiceGraph, ChoiceKind, ChoicePoint, Configuration, Goal, GoalKind, OptionSpec
from gsaudit.models.corpus import ConditionLabels, CountMatrix, GeneSetCollection, IdMap
from gsaudit.models.tables import DeMethod, DeTable, EnrichmentTable, RankingStat, TransformMethod
from gsaudit.schemas.trace import EvaluatedOption, OptimizationTrace, StepRecord
from gsaudit.services import diffexpr, enrichment, preprocess
from gsaudit.services.enrichment import BiasCovariate, EsConfig, GoseqMethod, UniverseChoice
from gsaudit.services.preprocess import DuplicatePolicy, PrefilterRule
from gsaudit.utils.config import settings
from gsaudit.utils.exceptions import AuditError, BiasUnavailable, InvalidChoiceOrder, SearchSpaceTooLarge, UnknownEngine

logger = logging.getLogger(__name__)

ENGINES = ("ora", "ease", "goseq", "gsea", "gsea_preranked", "cp_gsea", "padog")

# Choice ids
DE_METHOD = "de_method"
PREFILTER = "prefilter"
DUPLICATES = "duplicates"
COLLECTION = "collection"
UNIVERSE = "universe"
GOSEQ_METHOD = "goseq_method"
BIAS = "bias"
GENE_STAT = "gene_stat"
EXPONENT = "exponent"
TRANSFORM = "transform"

PREFILTER_RULES: Dict[str, PrefilterRule] = {
    "total_10": PrefilterRule.total_at_least(10),
    "total_50": PrefilterRule.total_at_least(50),
    "expr_filter": PrefilterRule.expr_filter(),
    "cpm_1_in_2": PrefilterRule.cpm_in_samples(1.0, 2),
}

DE_PREFILTERS = {
    DeMethod.NB_WALD.value: (OptionSpec("total_10", "total count >= 10"), OptionSpec("total_50", "total count >= 50")),
    DeMethod.MODERATED_T.value: (OptionSpec("expr_filter", "expression filter"),
                                 OptionSpec("cpm_1_in_2", "cpm >= 1 in >= 2 samples")),
}
COUNT_PREFILTERS = (OptionSpec("total_10", "total count >= 10"), OptionSpec("expr_filter", "expression filter"))

EXPONENTS = ("1", "0", "1.5", "2")

ORA_FAMILY = ("ora", "ease", "goseq")
DE_RANKED = ("gsea_preranked", "cp_gsea")


@dataclass(frozen=True)
class Capabilities:
    """Which optional inputs a study supplies"""
    has_id_map: bool = False
    has_lengths: bool = False
    collections: Tuple[str, ...] = ()


@dataclass(frozen=True)
class StudyInputs:
    counts: CountMatrix
    labels: ConditionLabels
    collections: Tuple[GeneSetCollection, ...]
    id_map: Optional[IdMap] = None

    def __post_init__(self):
        object.__setattr__(self, "collections", tuple(self.collections))
        if not self.collections:
            raise ValueError("At least one gene set collection is required")
        names = [c.name for c in self.collections]
        if len(set(names)) != len(names):
            raise ValueError(f"Collection names must be distinct: {names}")

    @property
    def capabilities(self) -> Capabilities:
        return Capabilities(
            has_id_map=self.id_map is not None and len(self.id_map) > 0,
            has_lengths=self.counts.lengths is not None,
            collections=tuple(c.name for c in self.collections),
        )

    def collection(self, name: Optional[str]) -> GeneSetCollection:
        if name is None:
            return self.collections[0]
        for c in self.collections:
            if c.name == name:
                return c
        raise KeyError(name)

    def with_labels(self, labels: ConditionLabels) -> "StudyInputs":
        return replace(self, labels=labels)


@dataclass(frozen=True)
class EngineOptions:
    """Numeric engine knobs; defaults come from settings"""
    gsea_permutations: int = field(default_factory=lambda: settings.GSEA_PERMUTATIONS)
    padog_permutations: int = field(default_factory=lambda: settings.PADOG_PERMUTATIONS)
    goseq_resamples: int = field(default_factory=lambda: settings.GOSEQ_RESAMPLES)
    min_set_size: int = field(default_factory=lambda: settings.MIN_SET_SIZE)
    max_set_size: int = field(default_factory=lambda: settings.MAX_SET_SIZE)
    de_alpha: float = field(default_factory=lambda: settings.DE_ALPHA)


def _point(choice_id: str, kind: ChoiceKind, options: Sequence[OptionSpec]) -> ChoicePoint:
    return ChoicePoint(choice_id, kind, tuple(options))


def _options(*ids: str) -> Tuple[OptionSpec, ...]:
    return tuple(OptionSpec(i, i) for i in ids)


def build_graph(engine: str, goal: Goal, capabilities: Capabilities,
                order: Optional[Sequence[str]] = None) -> ChoiceGraph:
    """Choice points exploited for one engine and goal, in evaluation order

    Points whose option list would have a single entry are left out; their
    value is then fixed at the default by the evaluator.
    """
    if engine not in ENGINES:
        raise UnknownEngine(engine)
    pre, par = ChoiceKind.PREPROCESSING, ChoiceKind.PARAMETER
    de_point = _point(DE_METHOD, pre, _options(DeMethod.NB_WALD.value, DeMethod.MODERATED_T.value))
    de_prefilter = ChoicePoint(PREFILTER, pre, depends_on=DE_METHOD, conditional_options=DE_PREFILTERS)
    count_prefilter = _point(PREFILTER, pre, COUNT_PREFILTERS)
    duplicates = _point(DUPLICATES, pre, _options(DuplicatePolicy.KEEP_FIRST.value, DuplicatePolicy.ROUNDED_MEAN.value))
    transform = _point(TRANSFORM, pre, _options(TransformMethod.LOG_CPM.value, TransformMethod.SHIFTED_LOG_VST.value))
    collection = _point(COLLECTION, par, _options(*capabilities.collections))
    universe = _point(UNIVERSE, par, _options(UniverseChoice.ANNOTATED_GENES.value, UniverseChoice.ALL_TESTED_GENES.value))
    exponent = _point(EXPONENT, par, _options(*EXPONENTS))

    points: List[ChoicePoint] = []
    if engine in ("ora", "cp_gsea"):
        points += [de_point, de_prefilter, duplicates]
    elif engine == "goseq":
        points += [de_point, de_prefilter]
    elif engine in ("ease", "gsea_preranked"):
        points += [de_point]
    elif engine == "gsea":
        points += [count_prefilter, transform]
    else:
        points += [count_prefilter, duplicates, transform]

    if goal.kind is GoalKind.MAX_DEGS and engine != "padog":
        points.append(collection)
    if engine in ORA_FAMILY:
        points.append(universe)
    if engine == "goseq":
        points.append(_point(GOSEQ_METHOD, par, _options(GoseqMethod.WALLENIUS.value, GoseqMethod.RESAMPLING.value)))
        biases = [BiasCovariate.MEAN_EXPRESSION.value]
        if capabilities.has_lengths:
            biases.insert(0, BiasCovariate.TRANSCRIPT_LENGTH.value)
        else:
            logger.warning("No gene lengths supplied; goseq bias fixed to mean expression")
        points.append(_point(BIAS, par, _options(*biases)))
    if engine == "gsea":
        points.append(_point(GENE_STAT, par, _options(RankingStat.SIGNAL_TO_NOISE.value,
                                                       RankingStat.T_STATISTIC.value,
                                                       RankingStat.DIFF_OF_CLASSES.value)))
    if engine in ("gsea",) + DE_RANKED:
        points.append(exponent)

    # ids the engine can expose in some study; they may be absent from this one
    available = {p.id for p in points} | ({COLLECTION} if engine != "padog" else set())
    if not capabilities.has_id_map:
        points = [p for p in points if p.id != DUPLICATES]
    points = [p for p in points if p.depends_on is not None or len(p.options) >= 2]
    if order is not None:
        unknown = set(order) - available
        if unknown:
            raise InvalidChoiceOrder(engine, f"unknown choice ids {sorted(unknown)}")
        if len(set(order)) != len(order):
            raise InvalidChoiceOrder(engine, "choice ids repeat")
        by_id = {p.id: p for p in points}
        order = [i for i in order if i in by_id]
        points = [by_id[i] for i in order] + [p for p in points if p.id not in order]
        seen = set()
        for p in points:
            if p.depends_on is not None and p.depends_on not in seen:
                raise InvalidChoiceOrder(engine, f"{p.id} depends on {p.depends_on}, which must come earlier")
            seen.add(p.id)
    return ChoiceGraph(tuple(points), engine, goal)


def objective(table: EnrichmentTable, goal: Goal) -> float:
    if goal.kind is GoalKind.MAX_DEGS:
        return float(table.significant_count)
    row = table.get(goal.target)
    if row is None:
        return 1.0
    return row.adjusted if goal.kind is GoalKind.MIN_ADJP else row.relative_rank


@dataclass(frozen=True)
class Evaluation:
    config: Configuration
    objective: float
    table: Optional[EnrichmentTable] = None
    failed: bool = False
    error: Optional[str] = None


class Evaluator(Protocol):
    def evaluate(self, config: Configuration) -> Evaluation:
        ...

    @property
    def executions(self) -> int:
        ...


class PipelineEvaluator:
    """Runs preprocess -> diffexpr -> enrichment for a configuration, memoised on its canonical key"""

    def __init__(self, inputs: StudyInputs, graph: ChoiceGraph, seed: int, options: Optional[EngineOptions] = None):
        self.inputs = inputs
        self.graph = graph
        self.goal = graph.goal
        self.engine = graph.engine
        self.seed = seed
        self.options = options or EngineOptions()
        self._cache: Dict[Tuple[Tuple[str, str], ...], Evaluation] = {}
        self._de_cache: Dict[Tuple[str, ...], Tuple[CountMatrix, DeTable]] = {}
        self._lock = threading.Lock()
        self._executions = 0

    @property
    def executions(self) -> int:
        return self._executions

    def evaluate(self, config: Configuration) -> Evaluation:
        resolved = self.graph.resolve(config)
        key = self.graph.canonical_key(resolved)
        with self._lock:
            if key in self._cache:
                return self._cache[key]
        try:
            table = self.run(resolved)
            result = Evaluation(resolved, objective(table, self.goal), table)
        except AuditError as e:
            logger.warning(f"{self.engine} evaluation failed for {dict(key)}: {e}")
            result = Evaluation(resolved, self.goal.worst, failed=True, error=f"{type(e).__name__}: {e}")
        with self._lock:
            self._executions += 1
            self._cache.setdefault(key, result)
            return self._cache[key]

    # Pipeline

    def _fixed(self, config: Configuration) -> Configuration:
        """Fill choices the graph does not exploit with their defaults"""
        full = dict(config)
        full.setdefault(DE_METHOD, DeMethod.NB_WALD.value)
        if PREFILTER not in full:
            if self.engine in ("gsea", "padog"):
                full[PREFILTER] = COUNT_PREFILTERS[0].id
            else:
                full[PREFILTER] = DE_PREFILTERS[full[DE_METHOD]][0].id
        full.setdefault(DUPLICATES, DuplicatePolicy.KEEP_FIRST.value)
        full.setdefault(COLLECTION, self.inputs.collections[0].name)
        full.setdefault(UNIVERSE, UniverseChoice.ANNOTATED_GENES.value)
        full.setdefault(GOSEQ_METHOD, GoseqMethod.WALLENIUS.value)
        full.setdefault(BIAS, BiasCovariate.TRANSCRIPT_LENGTH.value if self.inputs.counts.lengths is not None
                        else BiasCovariate.MEAN_EXPRESSION.value)
        full.setdefault(GENE_STAT, RankingStat.SIGNAL_TO_NOISE.value)
        full.setdefault(EXPONENT, EXPONENTS[0])
        full.setdefault(TRANSFORM, TransformMethod.LOG_CPM.value)
        return full

    def _prepared(self, config: Configuration) -> CountMatrix:
        matrix = self.inputs.counts
        if self.inputs.id_map is not None:
            matrix = preprocess.collapse_duplicates(matrix, self.inputs.id_map, DuplicatePolicy(config[DUPLICATES]))
        return preprocess.prefilter(matrix, PREFILTER_RULES[config[PREFILTER]], self.inputs.labels)

    def _de(self, config: Configuration) -> Tuple[CountMatrix, DeTable]:
        key = (config[DUPLICATES], config[PREFILTER], config[DE_METHOD])
        with self._lock:
            if key in self._de_cache:
                return self._de_cache[key]
        matrix = self._prepared(config)
        if DeMethod(config[DE_METHOD]) is DeMethod.NB_WALD:
            table = diffexpr.nb_wald(matrix, self.inputs.labels)
        else:
            table = diffexpr.moderated_t(preprocess.transform(matrix, TransformMethod.LOG_CPM), self.inputs.labels)
        with self._lock:
            self._de_cache.setdefault(key, (matrix, table))
        return matrix, table

    def _bias(self, matrix: CountMatrix, bias: BiasCovariate) -> Dict[str, float]:
        if bias is BiasCovariate.TRANSCRIPT_LENGTH:
            if matrix.lengths is None:
                raise BiasUnavailable(bias.value)
            values = matrix.lengths.astype(float)
        else:
            values = preprocess.cpm(matrix).mean(axis=1)
        return dict(zip(matrix.gene_ids, values))

    def run(self, config: Configuration) -> EnrichmentTable:
        config = self._fixed(config)
        opts = self.options
        sets = self.inputs.collection(config[COLLECTION])
        labels = self.inputs.labels
        es_cfg = EsConfig(float(config[EXPONENT]), opts.gsea_permutations)

        if self.engine in ("gsea", "padog"):
            values = preprocess.transform(self._prepared(config), TransformMethod(config[TRANSFORM]))
            if self.engine == "gsea":
                return enrichment.gsea_phenotype(values, labels, sets, RankingStat(config[GENE_STAT]), es_cfg,
                                                 seed=self.seed, min_size=opts.min_set_size,
                                                 max_size=opts.max_set_size)
            return enrichment.padog(values, labels, sets, permutations=opts.padog_permutations, seed=self.seed,
                                    min_size=opts.min_set_size, max_size=opts.max_set_size)

        matrix, de_table = self._de(config)
        if self.engine in DE_RANKED:
            return enrichment.gsea_preranked(diffexpr.ranked_from_de(de_table), sets, es_cfg, seed=self.seed,
                                             min_size=opts.min_set_size, max_size=opts.max_set_size)
        de_genes = diffexpr.de_gene_list(de_table, opts.de_alpha)
        universe = UniverseChoice(config[UNIVERSE])
        if self.engine == "goseq":
            bias = BiasCovariate(config[BIAS])
            return enrichment.goseq(de_genes, de_table.gene_ids, sets, self._bias(matrix, bias),
                                    method=GoseqMethod(config[GOSEQ_METHOD]), universe=universe,
                                    resamples=opts.goseq_resamples, seed=self.seed, bias_name=bias.value)
        return enrichment.ora(de_genes, sets, set(de_table.gene_ids), universe=universe, ease=self.engine == "ease")


def stepwise_optimize(graph: ChoiceGraph, evaluator: Evaluator) -> OptimizationTrace:
    """Greedy pass over the choice points in graph order

    Each step tries every active option of one point with the adopted options
    upstream and the current ones downstream, and adopts the greatest strict
    improvement; ties go to the earlier-listed option.
    """
    goal = graph.goal
    current = graph.defaults()
    start = evaluator.evaluate(current)
    current_value = start.objective
    default_config = dict(start.config)
    steps: List[StepRecord] = []

    for point in graph.points:
        options = point.option_ids(current)
        if not options:
            continue
        incumbent = current[point.id]
        before = current_value
        best_option, best_value = incumbent, current_value
        evaluated: List[EvaluatedOption] = []
        for option in options:
            result = evaluator.evaluate(graph.resolve({**current, point.id: option}))
            evaluated.append(EvaluatedOption(option=option, objective=result.objective,
                                             failed=result.failed, error=result.error))
            if option != incumbent and goal.better(result.objective, best_value):
                best_option, best_value = option, result.objective
        current = graph.resolve({**current, point.id: best_option})
        current_value = best_value
        steps.append(StepRecord(choice=point.id, kind=point.kind.value, incumbent=incumbent, evaluated=evaluated,
                                adopted=best_option, objective_before=before, objective_after=current_value))
        if best_option != incumbent:
            logger.debug(f"{graph.engine}/{goal.describe()}: {point.id} -> {best_option} ({before:g} -> {current_value:g})")

    return OptimizationTrace(engine=graph.engine, goal=goal.describe(), default_config=default_config,
                             default_objective=start.objective, default_failed=start.failed, steps=steps,
                             final_objective=current_value, final_config=dict(current),
                             evaluations=evaluator.executions)


@dataclass(frozen=True)
class ExhaustiveResult:
    config: Configuration
    objective: float
    evaluated: int


def exhaustive_optimize(graph: ChoiceGraph, evaluator: Evaluator, cap: int = None) -> ExhaustiveResult:
    """Global optimum over the dependency-resolved product; first in enumeration order on ties"""
    cap = settings.SEARCH_SPACE_CAP if cap is None else cap
    size = 0
    for _ in graph.enumerate_configurations():
        size += 1
        if size > cap:
            raise SearchSpaceTooLarge(graph.size(), cap)
    best: Optional[Evaluation] = None
    for config in graph.enumerate_configurations():
        result = evaluator.evaluate(config)
        if best is None or graph.goal.better(result.objective, best.objective):
            best = result
    return ExhaustiveResult(dict(best.config), best.objective, size)


def replay(trace: OptimizationTrace, evaluator: Evaluator) -> float:
    """Objective of the trace's final configuration, re-evaluated"""
    return evaluator.evaluate(trace.final_config).objective

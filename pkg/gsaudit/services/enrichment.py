"""
Enrichment engines for GSA Audit
Over-representation (plain and EASE-adjusted), bias-weighted ORA with
Wallenius and resampling p-values, weighted-KS GSEA with phenotype and
preranked nulls, PADOG-style weighted scoring, and rank assembly
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence, Set, Tuple

import numpy as np
from scipy import integrate, optimize, stats
from scipy.special import gammaln, logsumexp
from sklearn.isotonic import IsotonicRegression

from gsaudit.models.corpus import ConditionLabels, GeneSetCollection
from gsaudit.models.tables import EngineTag, EnrichmentRow, EnrichmentTable, RankedList, RankingStat, TransformedMatrix
from gsaudit.services.diffexpr import _moderated_t_stats, bh_adjust, gene_statistic, order_genes
from gsaudit.utils.config import settings
from gsaudit.utils.exceptions import (
    BiasUnavailable, DegenerateDesign, DegeneratePwf, EmptyCollectionAfterFilter, EmptySetInList,
    EmptyTable, EmptyUniverse, InvalidContingency, NoComplement, NonpositiveOdds,
)
from gsaudit.utils.seeding import rng_for

logger = logging.getLogger(__name__)

ALLOWED_EXPONENTS = (0.0, 1.0, 1.5, 2.0)
TAIL_RELATIVE_CUTOFF = 1e-17


class UniverseChoice(str, Enum):
    ANNOTATED_GENES = "annotated"
    ALL_TESTED_GENES = "all_tested"


class BiasCovariate(str, Enum):
    TRANSCRIPT_LENGTH = "transcript_length"
    MEAN_EXPRESSION = "mean_expression"


class GoseqMethod(str, Enum):
    WALLENIUS = "wallenius"
    RESAMPLING = "resampling"


@dataclass(frozen=True)
class EsConfig:
    exponent: float = 1.0
    permutations: int = 1000

    def __post_init__(self):
        if float(self.exponent) not in ALLOWED_EXPONENTS:
            raise ValueError(f"Exponent must be one of {ALLOWED_EXPONENTS}, got {self.exponent}")
        if self.permutations < 1:
            raise ValueError("Permutation count must be positive")


def threshold_for(engine: EngineTag) -> float:
    if engine in (EngineTag.GSEA_PHENOTYPE, EngineTag.GSEA_PRERANKED):
        return settings.GSEA_Q_THRESHOLD
    return settings.BH_THRESHOLD


# Ranks

def assemble_ranks(table: EnrichmentTable) -> EnrichmentTable:
    """Dense ranks over distinct adjusted values; relative rank = rank / max rank"""
    if not table.rows:
        raise EmptyTable()
    adjusted = np.array([row.adjusted for row in table.rows])
    distinct, inverse = np.unique(adjusted, return_inverse=True)
    max_rank = len(distinct)
    rows = []
    for row, rank in zip(table.rows, inverse + 1):
        relative = 1.0 if row.adjusted == 1.0 else rank / max_rank
        rows.append(row.model_copy(update={
            "dense_rank": int(rank),
            "relative_rank": float(relative),
            "significant": bool(row.adjusted < table.threshold),
        }))
    return table.model_copy(update={"rows": rows})


def _build_table(engine: EngineTag, names: Sequence[str], statistic, raw_p, adjusted,
                 sort_keys, notes: Optional[Dict[str, str]] = None) -> EnrichmentTable:
    rows = [
        EnrichmentRow(set_name=name, statistic=float(s), raw_p=float(p), adjusted=float(a))
        for name, s, p, a in zip(names, statistic, raw_p, adjusted)
    ]
    order = sorted(range(len(rows)), key=lambda i: (*sort_keys[i], rows[i].set_name))
    table = EnrichmentTable(engine=engine, threshold=threshold_for(engine),
                            rows=[rows[i] for i in order], notes=notes or {})
    return assemble_ranks(table)


def filter_sets(sets: GeneSetCollection, genes: Set[str], min_size: int = None,
                max_size: int = None) -> Dict[str, FrozenSet[str]]:
    """Intersect sets with the measured genes and keep those within the size bounds"""
    min_size = settings.MIN_SET_SIZE if min_size is None else min_size
    max_size = settings.MAX_SET_SIZE if max_size is None else max_size
    kept = {}
    for name, members in sets.sets.items():
        present = members & genes
        if min_size <= len(present) <= max_size:
            kept[name] = frozenset(present)
    if not kept:
        raise EmptyCollectionAfterFilter(min_size, max_size)
    logger.debug(f"{len(kept)}/{len(sets)} sets of {sets.name} within size bounds [{min_size}, {max_size}]")
    return kept


# Over-representation

def _check_contingency(k: int, N: int, K: int, n: int) -> Tuple[int, int]:
    if not (0 <= K <= N and 0 <= n <= N):
        raise InvalidContingency(k, N, K, n)
    lo, hi = max(0, n + K - N), min(K, n)
    if not lo <= k <= hi:
        raise InvalidContingency(k, N, K, n)
    return lo, hi


def hypergeom_tail(k: int, N: int, K: int, n: int) -> float:
    """P(X >= k) for X ~ hypergeometric(population N, K successes, n draws), summed in log space"""
    lo, hi = _check_contingency(k, N, K, n)
    if k <= lo:
        return 1.0
    support = np.arange(k, hi + 1)
    return float(min(1.0, np.exp(logsumexp(stats.hypergeom.logpmf(support, N, K, n)))))


def ora(de_genes: Set[str], sets: GeneSetCollection, tested: Set[str],
        universe: UniverseChoice = UniverseChoice.ANNOTATED_GENES, ease: bool = False) -> EnrichmentTable:
    """Hypergeometric over-representation of the DE list in each set"""
    de_genes, tested = set(de_genes), set(tested)
    if not de_genes <= tested:
        raise ValueError("DE genes must be a subset of the tested genes")
    universe = UniverseChoice(universe)
    if universe is UniverseChoice.ANNOTATED_GENES:
        U = sets.annotated_genes & tested
    else:
        U = tested
    if not U:
        raise EmptyUniverse()
    N = len(U)
    de_in_u = de_genes & U
    n = len(de_in_u)

    names, ratio, raw_p = [], [], []
    for name, members in sets.sets.items():
        in_u = members & U
        K = len(in_u)
        if K == 0:
            continue
        k = len(de_in_u & in_u)
        # P(X >= k-1) is 1 when k-1 falls below the forced overlap
        tail_k = max(k - 1, max(0, n + K - N)) if ease else k
        names.append(name)
        raw_p.append(hypergeom_tail(tail_k, N, K, n))
        ratio.append(k * N / (K * n) if n else 0.0)
    if not names:
        raise EmptyTable()
    adjusted = bh_adjust(raw_p)
    keys = [(a, p) for a, p in zip(adjusted, raw_p)]
    return _build_table(EngineTag.ORA, names, ratio, raw_p, adjusted, keys,
                        notes={"universe": universe.value, "ease": str(ease).lower(), "universe_size": str(N)})


# Bias-weighted ORA

def pwf_fit(de_indicator: Sequence[int], bias: Sequence[float]) -> np.ndarray:
    """Monotone (non-decreasing) DE probability as a function of the bias covariate"""
    indicator = np.asarray(de_indicator, dtype=float)
    bias = np.asarray(bias, dtype=float)
    m = indicator.size
    if m == 0 or indicator.min() == indicator.max():
        raise DegeneratePwf()
    fitted = IsotonicRegression(increasing=True, out_of_bounds="clip").fit(bias, indicator).predict(bias)
    return np.clip(fitted, 1.0 / (2 * m), 1.0 - 1.0 / (2 * m))


def _log_choose(a: int, b: int) -> float:
    return gammaln(a + 1) - gammaln(b + 1) - gammaln(a - b + 1)


def _wallenius_log_integral(x: int, N: int, K: int, n: int, omega: float) -> float:
    """log of the Wallenius integral for P(X = x), scaled at its peak for stability"""
    D = omega * (K - x) + (N - K - (n - x))
    if D < 1.0:
        def integrand(t):
            return (1.0 - t ** (omega / D)) ** x * (1.0 - t ** (1.0 / D)) ** (n - x)
        value, _ = integrate.quad(integrand, 0.0, 1.0, epsabs=1e-13, epsrel=1e-10, limit=200)
        return np.log(value) if value > 0 else -np.inf

    # substitute t = u**D: integrand D u^(D-1) (1 - u^omega)^x (1 - u)^(n-x)
    def log_f(u):
        return (np.log(D) + (D - 1.0) * np.log(u) + x * np.log1p(-u ** omega) + (n - x) * np.log1p(-u))

    eps = 1e-300
    if x == 0 and n - x == 0:
        return 0.0
    peak = optimize.minimize_scalar(lambda u: -log_f(u), bounds=(eps, 1.0 - 1e-16), method="bounded",
                                    options={"xatol": 1e-12})
    u_star = float(peak.x)
    log_peak = float(log_f(u_star))
    if not np.isfinite(log_peak):
        log_peak = 0.0

    def scaled(u):
        if u <= 0.0 or u >= 1.0:
            return 0.0 if D > 1.0 or u >= 1.0 else float(np.exp(np.log(D) - log_peak))
        return float(np.exp(log_f(u) - log_peak))

    value, _ = integrate.quad(scaled, 0.0, 1.0, points=[u_star], epsabs=1e-14, epsrel=1e-10, limit=200)
    return log_peak + np.log(value) if value > 0 else -np.inf


def wallenius_logpmf(x: int, N: int, K: int, n: int, omega: float) -> float:
    """log P(X = x) under Wallenius' noncentral hypergeometric law"""
    lo, hi = max(0, n + K - N), min(K, n)
    if x < lo or x > hi:
        return -np.inf
    if n == N or n == 0:
        return 0.0 if x == (K if n == N else 0) else -np.inf
    return _log_choose(K, x) + _log_choose(N - K, n - x) + _wallenius_log_integral(x, N, K, n, omega)


def wallenius_tail(k: int, N: int, K: int, n: int, omega: float) -> float:
    """P(X >= k) under Wallenius' law with odds omega for the set's genes"""
    lo, hi = _check_contingency(k, N, K, n)
    if not omega > 0:
        raise NonpositiveOdds(omega)
    if k <= lo:
        return 1.0
    log_total = -np.inf
    previous = -np.inf
    for x in range(k, hi + 1):
        term = wallenius_logpmf(x, N, K, n, omega)
        log_total = np.logaddexp(log_total, term)
        # unimodal: once terms fall and become negligible, the rest is smaller still
        if term < previous and term - log_total < np.log(TAIL_RELATIVE_CUTOFF):
            break
        previous = term
    return float(min(1.0, max(0.0, np.exp(log_total))))


def goseq(de_genes: Set[str], tested: Sequence[str], sets: GeneSetCollection, bias: Mapping[str, float],
          method: GoseqMethod = GoseqMethod.WALLENIUS,
          universe: UniverseChoice = UniverseChoice.ANNOTATED_GENES,
          resamples: int = None, seed: int = 0, bias_name: str = "covariate") -> EnrichmentTable:
    """ORA corrected for a DE-detection bias through a probability weighting function"""
    method, universe = GoseqMethod(method), UniverseChoice(universe)
    resamples = settings.GOSEQ_RESAMPLES if resamples is None else resamples
    for gene in tested:
        if gene not in bias or not np.isfinite(bias[gene]):
            raise BiasUnavailable(bias_name, gene)
    annotated = sets.annotated_genes
    U = [g for g in tested if universe is UniverseChoice.ALL_TESTED_GENES or g in annotated]
    if not U:
        raise EmptyUniverse()
    index = {g: i for i, g in enumerate(U)}
    indicator = np.array([g in de_genes for g in U], dtype=float)
    weights = pwf_fit(indicator, [bias[g] for g in U])
    N, n = len(U), int(indicator.sum())

    if method is GoseqMethod.RESAMPLING:
        draws = np.vstack([rng_for(seed, "goseq", r).random(N) < weights for r in range(resamples)])

    names, odds, raw_p = [], [], []
    for name, members in sets.sets.items():
        member_idx = np.array(sorted(index[g] for g in members if g in index), dtype=int)
        K = member_idx.size
        if K == 0:
            continue
        k = int(indicator[member_idx].sum())
        inside = np.zeros(N, dtype=bool)
        inside[member_idx] = True
        if K == N:
            omega = 1.0
        else:
            w_in, w_out = weights[inside].mean(), weights[~inside].mean()
            omega = (w_in / (1.0 - w_in)) / (w_out / (1.0 - w_out))
        if method is GoseqMethod.WALLENIUS:
            p = wallenius_tail(k, N, K, n, omega)
        else:
            overlap = draws[:, member_idx].sum(axis=1)
            p = (1.0 + np.count_nonzero(overlap >= k)) / (1.0 + resamples)
        names.append(name)
        odds.append(omega)
        raw_p.append(p)
    if not names:
        raise EmptyTable()
    adjusted = bh_adjust(raw_p)
    keys = [(a, p) for a, p in zip(adjusted, raw_p)]
    table = _build_table(EngineTag.GOSEQ, names, odds, raw_p, adjusted, keys,
                         notes={"method": method.value, "universe": universe.value, "bias": bias_name})
    logger.debug(f"goseq ({method.value}, {universe.value}): {table.significant_count} significant of {len(table)}")
    return table


# Weighted Kolmogorov-Smirnov

def es_matrix(statistic: np.ndarray, membership: np.ndarray, exponent: float) -> np.ndarray:
    """Enrichment scores of every membership row against one ordered statistic vector"""
    membership = np.atleast_2d(membership).astype(bool)
    n_genes = membership.shape[1]
    hit_weights = np.abs(statistic)[None, :] ** exponent * membership
    norm = hit_weights.sum(axis=1, keepdims=True)
    # all-zero member statistics fall back to equal weights
    zero = norm[:, 0] == 0
    if zero.any():
        hit_weights[zero] = membership[zero]
        norm[zero] = membership[zero].sum(axis=1, keepdims=True)
    misses = n_genes - membership.sum(axis=1, keepdims=True)
    running = np.cumsum(hit_weights / norm - (~membership) / misses, axis=1)
    peak = np.argmax(np.abs(running), axis=1)
    return running[np.arange(running.shape[0]), peak]


def enrichment_score(ranked: RankedList, members: Set[str], exponent: float) -> float:
    """Signed maximal deviation of the weighted running sum"""
    membership = np.array([g in members for g in ranked.gene_ids], dtype=bool)
    if not membership.any():
        raise EmptySetInList()
    if membership.all():
        raise NoComplement()
    return float(es_matrix(ranked.statistic, membership, exponent)[0])


def _gsea_significance(es: np.ndarray, null: np.ndarray):
    """NES, nominal p and pooled-NES q-values from observed and null ES"""
    n_sets = es.size
    nes = np.zeros(n_sets)
    raw_p = np.ones(n_sets)
    degenerate = np.ones(n_sets, dtype=bool)
    null_nes_pos: List[np.ndarray] = []
    null_nes_neg: List[np.ndarray] = []
    for i in range(n_sets):
        row = null[i]
        pos, neg = row[row >= 0], row[row < 0]
        mean_pos = pos.mean() if pos.size else 0.0
        mean_neg = np.abs(neg).mean() if neg.size else 0.0
        if mean_pos > 0:
            null_nes_pos.append(pos / mean_pos)
        if mean_neg > 0:
            null_nes_neg.append(neg / mean_neg)
        if es[i] > 0 and mean_pos > 0:
            same, scale = pos, mean_pos
        elif es[i] < 0 and mean_neg > 0:
            same, scale = np.abs(neg), mean_neg
        else:
            continue
        degenerate[i] = False
        nes[i] = es[i] / scale
        raw_p[i] = (1.0 + np.count_nonzero(same >= abs(es[i]))) / (1.0 + same.size)

    pooled_pos = np.concatenate(null_nes_pos) if null_nes_pos else np.empty(0)
    pooled_neg = np.concatenate(null_nes_neg) if null_nes_neg else np.empty(0)
    q = np.ones(n_sets)
    for sign, pooled in ((1.0, pooled_pos), (-1.0, np.abs(pooled_neg))):
        side = np.flatnonzero(~degenerate & (np.sign(nes) == sign))
        if side.size == 0:
            continue
        magnitudes = np.abs(nes[side])
        # most extreme first, then force q non-decreasing inward
        order = side[np.argsort(-magnitudes, kind="stable")]
        running = 0.0
        for i in order:
            star = abs(nes[i])
            null_frac = np.count_nonzero(pooled >= star) / pooled.size if pooled.size else 1.0
            obs_frac = np.count_nonzero(magnitudes >= star) / side.size
            running = max(running, min(1.0, null_frac / obs_frac))
            q[i] = running
    return nes, raw_p, q, int(degenerate.sum())


def _gsea_result(engine: EngineTag, names: List[str], es: np.ndarray, null: np.ndarray,
                 notes: Dict[str, str]) -> EnrichmentTable:
    nes, raw_p, q, degenerate = _gsea_significance(es, null)
    if degenerate:
        logger.debug(f"{engine.value}: {degenerate} sets without same-sign nulls set to NES 0, p 1")
    notes = {**notes, "degenerate_sets": str(degenerate)}
    keys = [(qi, -abs(ni)) for qi, ni in zip(q, nes)]
    return _build_table(engine, names, nes, raw_p, q, keys, notes=notes)


def _membership(gene_order: Sequence[str], sets: Mapping[str, FrozenSet[str]]) -> np.ndarray:
    position = {g: i for i, g in enumerate(gene_order)}
    matrix = np.zeros((len(sets), len(gene_order)), dtype=bool)
    for row, members in enumerate(sets.values()):
        matrix[row, [position[g] for g in members]] = True
    return matrix


def _check_complements(filtered: Mapping[str, FrozenSet[str]], n_genes: int) -> Dict[str, FrozenSet[str]]:
    return {name: members for name, members in filtered.items() if len(members) < n_genes}


def gsea_phenotype(values: TransformedMatrix, labels: ConditionLabels, sets: GeneSetCollection,
                   stat: RankingStat, cfg: EsConfig, seed: int = 0,
                   min_size: int = None, max_size: int = None) -> EnrichmentTable:
    """GSEA with a sample-label permutation null"""
    stat = RankingStat(stat)
    if stat in (RankingStat.SIGNAL_TO_NOISE, RankingStat.T_STATISTIC) and min(labels.group_sizes) < 2:
        raise DegenerateDesign(labels.group_sizes)
    filtered = _check_complements(filter_sets(sets, set(values.gene_ids), min_size, max_size), len(values.gene_ids))
    if not filtered:
        raise EmptyCollectionAfterFilter(min_size or settings.MIN_SET_SIZE, max_size or settings.MAX_SET_SIZE)
    base = _membership(values.gene_ids, filtered)
    second = labels.second_group

    def scores(mask: np.ndarray) -> np.ndarray:
        statistic = gene_statistic(values.values, mask, stat)
        order = order_genes(values.gene_ids, statistic)
        return es_matrix(statistic[order], base[:, order], cfg.exponent)

    es = scores(second)
    null = np.empty((len(filtered), cfg.permutations))
    for b in range(cfg.permutations):
        null[:, b] = scores(rng_for(seed, EngineTag.GSEA_PHENOTYPE.value, b).permutation(second))
    return _gsea_result(EngineTag.GSEA_PHENOTYPE, list(filtered), es, null,
                        notes={"statistic": stat.value, "exponent": f"{cfg.exponent:g}",
                               "permutations": str(cfg.permutations)})


def gsea_preranked(ranked: RankedList, sets: GeneSetCollection, cfg: EsConfig, seed: int = 0,
                   min_size: int = None, max_size: int = None) -> EnrichmentTable:
    """GSEA on a fixed ranking with a gene-set permutation null"""
    filtered = _check_complements(filter_sets(sets, set(ranked.gene_ids), min_size, max_size), len(ranked))
    if not filtered:
        raise EmptyCollectionAfterFilter(min_size or settings.MIN_SET_SIZE, max_size or settings.MAX_SET_SIZE)
    base = _membership(ranked.gene_ids, filtered)
    statistic = np.asarray(ranked.statistic)
    es = es_matrix(statistic, base, cfg.exponent)
    null = np.empty((len(filtered), cfg.permutations))
    for b in range(cfg.permutations):
        shuffled = rng_for(seed, EngineTag.GSEA_PRERANKED.value, b).permuted(base, axis=1)
        null[:, b] = es_matrix(statistic, shuffled, cfg.exponent)
    return _gsea_result(EngineTag.GSEA_PRERANKED, list(filtered), es, null,
                        notes={"statistic": ranked.stat.value, "exponent": f"{cfg.exponent:g}",
                               "permutations": str(cfg.permutations)})


# PADOG

def padog_weights(frequencies: np.ndarray) -> np.ndarray:
    """1 + sqrt((f_max - f) / (f_max - f_min)); all ones when frequencies are equal"""
    frequencies = np.asarray(frequencies, dtype=float)
    f_max, f_min = frequencies.max(), frequencies.min()
    if f_max == f_min:
        return np.ones_like(frequencies)
    return 1.0 + np.sqrt((f_max - frequencies) / (f_max - f_min))


def padog(values: TransformedMatrix, labels: ConditionLabels, sets: GeneSetCollection,
          permutations: int = None, seed: int = 0, min_size: int = None, max_size: int = None,
          prior_df: float = None) -> EnrichmentTable:
    """Mean weighted |moderated t| per set, down-weighting genes shared by many sets"""
    if min(labels.group_sizes) < 2:
        raise DegenerateDesign(labels.group_sizes)
    permutations = settings.PADOG_PERMUTATIONS if permutations is None else permutations
    prior_df = settings.MODERATION_PRIOR_DF if prior_df is None else prior_df
    filtered = filter_sets(sets, set(values.gene_ids), min_size, max_size)
    membership = _membership(values.gene_ids, filtered)
    frequency = membership.sum(axis=0)
    annotated = frequency > 0
    weights = np.zeros(len(values.gene_ids))
    weights[annotated] = padog_weights(frequency[annotated])
    scoring = membership * weights[None, :] / membership.sum(axis=1, keepdims=True)

    second = labels.second_group

    def scores(mask: np.ndarray) -> np.ndarray:
        return scoring @ np.abs(_moderated_t_stats(values.values, mask, prior_df)[1])

    observed = scores(second)
    null = np.empty((len(filtered), permutations))
    for b in range(permutations):
        null[:, b] = scores(rng_for(seed, EngineTag.PADOG.value, b).permutation(second))
    mean_null = null.mean(axis=1)
    sd_null = null.std(axis=1, ddof=1) if permutations > 1 else np.zeros(len(filtered))
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(sd_null > 0, (observed - mean_null) / sd_null, 0.0)
    raw_p = (1.0 + (null >= observed[:, None]).sum(axis=1)) / (1.0 + permutations)
    adjusted = bh_adjust(raw_p)
    keys = [(a, -zi) for a, zi in zip(adjusted, z)]
    return _build_table(EngineTag.PADOG, list(filtered), z, raw_p, adjusted, keys,
                        notes={"permutations": str(permutations)})

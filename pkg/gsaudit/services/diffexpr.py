"""
Differential expression for GSA Audit
Moderated t on transformed values, a negative-binomial Wald analogue on
counts, gene-level ranking statistics and Benjamini-Hochberg adjustment
"""

import logging
from typing import Sequence, Set

import numpy as np
from scipy import stats
from statsmodels.stats.multitest import multipletests

from gsaudit.models.corpus import ConditionLabels, CountMatrix
from gsaudit.models.tables import DeMethod, DeTable, RankedList, RankingStat, TransformedMatrix
from gsaudit.services.preprocess import normalized_counts
from gsaudit.utils.config import settings
from gsaudit.utils.exceptions import DegenerateDesign, InvalidP

logger = logging.getLogger(__name__)

SD_FLOOR = 1e-8
SNR_MIN_SD_FRACTION = 0.2
VARIANCE_FLOOR = 1e-12


def _require_replicates(labels: ConditionLabels) -> None:
    if min(labels.group_sizes) < 2:
        raise DegenerateDesign(labels.group_sizes)


def bh_adjust(p: Sequence[float]) -> np.ndarray:
    """Benjamini-Hochberg step-up adjustment, returned in input order"""
    p = np.asarray(p, dtype=float)
    if p.size == 0:
        return p.copy()
    bad = p[~((p >= 0) & (p <= 1))]
    if bad.size:
        raise InvalidP(float(bad[0]))
    return multipletests(p, method="fdr_bh")[1]


def shrunk_variance(s2, df_resid: float, prior_df: float, prior_var: float):
    """Posterior variance (d0*s0^2 + dg*sg^2) / (d0 + dg)"""
    return (prior_df * prior_var + df_resid * np.asarray(s2, dtype=float)) / (prior_df + df_resid)


def _moderated_t_stats(values: np.ndarray, second: np.ndarray, prior_df: float):
    """Vectorised moderated t for one label arrangement; returns (delta, t, df)"""
    first = ~second
    n1, n2 = int(first.sum()), int(second.sum())
    mean1 = values[:, first].mean(axis=1)
    mean2 = values[:, second].mean(axis=1)
    resid = (((values[:, first] - mean1[:, None]) ** 2).sum(axis=1)
             + ((values[:, second] - mean2[:, None]) ** 2).sum(axis=1))
    df_resid = n1 + n2 - 2
    s2 = resid / df_resid
    shrunk = np.maximum(shrunk_variance(s2, df_resid, prior_df, np.median(s2)), VARIANCE_FLOOR)
    delta = mean2 - mean1
    t = delta / (np.sqrt(shrunk) * np.sqrt(1.0 / n1 + 1.0 / n2))
    return delta, t, prior_df + df_resid


def moderated_t(values: TransformedMatrix, labels: ConditionLabels, prior_df: float = None) -> DeTable:
    """Empirical-Bayes style t with the residual variance shrunk toward the median"""
    _require_replicates(labels)
    prior_df = settings.MODERATION_PRIOR_DF if prior_df is None else prior_df
    delta, t, df = _moderated_t_stats(values.values, labels.second_group, prior_df)
    raw_p = np.minimum(1.0, 2.0 * stats.t.sf(np.abs(t), df))
    return DeTable(values.gene_ids, delta, t, raw_p, bh_adjust(raw_p), DeMethod.MODERATED_T)


def nb_wald(matrix: CountMatrix, labels: ConditionLabels, dispersion_floor: float = None) -> DeTable:
    """Wald test on log2 group means of size-factor normalised counts"""
    _require_replicates(labels)
    floor = settings.DISPERSION_FLOOR if dispersion_floor is None else dispersion_floor
    norm = normalized_counts(matrix)
    second = labels.second_group
    first = ~second
    n1, n2 = int(first.sum()), int(second.sum())
    m1 = norm[:, first].mean(axis=1)
    m2 = norm[:, second].mean(axis=1)
    lfc = np.log2((m2 + 0.5) / (m1 + 0.5))

    pooled_var = (((norm[:, first] - m1[:, None]) ** 2).sum(axis=1)
                  + ((norm[:, second] - m2[:, None]) ** 2).sum(axis=1)) / (n1 + n2 - 2)
    overall = norm.mean(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        alpha = np.where(overall > 0, (pooled_var - overall) / overall ** 2, floor)
    alpha = np.maximum(floor, alpha)
    alpha = (alpha + np.median(alpha)) / 2.0

    ln2_sq = np.log(2.0) ** 2
    v1 = (1.0 / n1) * (1.0 / (m1 + 0.5) + alpha) / ln2_sq
    v2 = (1.0 / n2) * (1.0 / (m2 + 0.5) + alpha) / ln2_sq
    z = lfc / np.sqrt(v1 + v2)
    raw_p = np.minimum(1.0, 2.0 * stats.norm.sf(np.abs(z)))
    return DeTable(matrix.gene_ids, lfc, z, raw_p, bh_adjust(raw_p), DeMethod.NB_WALD)


def _group_moments(values: np.ndarray, second: np.ndarray):
    first = ~second
    mu1 = values[:, first].mean(axis=1)
    mu2 = values[:, second].mean(axis=1)
    sd1 = values[:, first].std(axis=1, ddof=1)
    sd2 = values[:, second].std(axis=1, ddof=1)
    return mu1, mu2, sd1, sd2, int(first.sum()), int(second.sum())


def gene_statistic(values: np.ndarray, second: np.ndarray, stat: RankingStat) -> np.ndarray:
    """Gene-level statistic (group 1 minus group 2) for one label arrangement"""
    mu1, mu2, sd1, sd2, n1, n2 = _group_moments(values, second)
    if stat is RankingStat.DIFF_OF_CLASSES:
        return mu1 - mu2
    if stat is RankingStat.SIGNAL_TO_NOISE:
        sd1 = np.maximum.reduce([sd1, SNR_MIN_SD_FRACTION * np.abs(mu1), np.full_like(sd1, SD_FLOOR)])
        sd2 = np.maximum.reduce([sd2, SNR_MIN_SD_FRACTION * np.abs(mu2), np.full_like(sd2, SD_FLOOR)])
        return (mu1 - mu2) / (sd1 + sd2)
    if stat is RankingStat.T_STATISTIC:
        return (mu1 - mu2) / np.maximum(np.sqrt(sd1 ** 2 / n1 + sd2 ** 2 / n2), SD_FLOOR)
    raise ValueError(f"Statistic {stat} is not computed from expression values")


def order_genes(gene_ids: Sequence[str], statistic: np.ndarray) -> np.ndarray:
    """Indices sorting by descending statistic, ties by gene id"""
    id_rank = np.argsort(np.argsort(np.asarray(gene_ids, dtype=object).astype(str), kind="stable"), kind="stable")
    return np.lexsort((id_rank, -np.asarray(statistic)))


def ranking_stat(values: TransformedMatrix, labels: ConditionLabels, stat: RankingStat) -> RankedList:
    stat = RankingStat(stat)
    if stat in (RankingStat.SIGNAL_TO_NOISE, RankingStat.T_STATISTIC):
        _require_replicates(labels)
    statistic = gene_statistic(values.values, labels.second_group, stat)
    order = order_genes(values.gene_ids, statistic)
    return RankedList(tuple(values.gene_ids[i] for i in order), statistic[order], stat)


def ranked_from_de(table: DeTable, p_floor: float = None) -> RankedList:
    """sign(LFC) * -log10(p): the DE-derived ranking fed to preranked engines"""
    if len(table) == 0:
        raise ValueError("DE table is empty")
    p_floor = settings.PVALUE_FLOOR if p_floor is None else p_floor
    score = np.sign(table.log2_fold_change) * -np.log10(np.maximum(table.raw_p, p_floor))
    score = score + 0.0  # drop negative zeros
    order = order_genes(table.gene_ids, score)
    return RankedList(tuple(table.gene_ids[i] for i in order), score[order], RankingStat.DE_DERIVED)


def de_gene_list(table: DeTable, alpha: float = None) -> Set[str]:
    """Genes with adjusted p strictly below alpha"""
    alpha = settings.DE_ALPHA if alpha is None else alpha
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return {g for g, p in zip(table.gene_ids, table.adjusted_p) if p < alpha}

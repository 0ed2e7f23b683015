"""
Preprocessing options for GSA Audit
Pre-filtering variants, duplicate-id collapse, size factors and the two
expression transformations
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional

import numpy as np

from gsaudit.models.corpus import ConditionLabels, CountMatrix, IdMap
from gsaudit.models.tables import TransformedMatrix, TransformMethod
from gsaudit.utils.exceptions import AllGenesFiltered, NoReferenceGenes, UnmappedGene, ZeroLibrary

logger = logging.getLogger(__name__)

EXPR_FILTER_MIN_COUNT = 10
EXPR_FILTER_MIN_TOTAL = 15


class PrefilterKind(str, Enum):
    TOTAL_AT_LEAST = "total_at_least"
    CPM_IN_SAMPLES = "cpm_in_samples"
    EXPR_FILTER = "expr_filter"


@dataclass(frozen=True)
class PrefilterRule:
    kind: PrefilterKind
    threshold: int = 0
    cpm_cutoff: float = 1.0
    min_samples: int = 1

    def __post_init__(self):
        if self.threshold < 0:
            raise ValueError("Total-count threshold must be >= 0")
        if self.cpm_cutoff <= 0:
            raise ValueError("CPM cutoff must be > 0")
        if self.min_samples < 1:
            raise ValueError("Minimum sample count must be >= 1")

    @classmethod
    def total_at_least(cls, threshold: int) -> "PrefilterRule":
        return cls(PrefilterKind.TOTAL_AT_LEAST, threshold=threshold)

    @classmethod
    def cpm_in_samples(cls, cpm_cutoff: float, min_samples: int) -> "PrefilterRule":
        return cls(PrefilterKind.CPM_IN_SAMPLES, cpm_cutoff=cpm_cutoff, min_samples=min_samples)

    @classmethod
    def expr_filter(cls) -> "PrefilterRule":
        return cls(PrefilterKind.EXPR_FILTER)

    def describe(self) -> str:
        if self.kind is PrefilterKind.TOTAL_AT_LEAST:
            return f"total >= {self.threshold}"
        if self.kind is PrefilterKind.CPM_IN_SAMPLES:
            return f"cpm >= {self.cpm_cutoff:g} in >= {self.min_samples} samples"
        return "expression filter"


class DuplicatePolicy(str, Enum):
    KEEP_FIRST = "keep_first"
    ROUNDED_MEAN = "rounded_mean"


def cpm(matrix: CountMatrix) -> np.ndarray:
    """Counts per million of each sample's library"""
    libsizes = matrix.library_sizes
    for sample, size in zip(matrix.samples, libsizes):
        if size <= 0:
            raise ZeroLibrary(sample)
    return matrix.counts / libsizes * 1e6


def prefilter(matrix: CountMatrix, rule: PrefilterRule, labels: ConditionLabels) -> CountMatrix:
    """Remove lowly expressed genes; 'less than' thresholds are strict"""
    totals = matrix.counts.sum(axis=1)
    if rule.kind is PrefilterKind.TOTAL_AT_LEAST:
        keep = totals >= rule.threshold
    elif rule.kind is PrefilterKind.CPM_IN_SAMPLES:
        keep = (cpm(matrix) >= rule.cpm_cutoff).sum(axis=1) >= rule.min_samples
    else:
        cutoff = EXPR_FILTER_MIN_COUNT * 1e6 / np.median(matrix.library_sizes)
        min_samples = min(labels.group_sizes)
        keep = ((cpm(matrix) >= cutoff).sum(axis=1) >= min_samples) & (totals >= EXPR_FILTER_MIN_TOTAL)
    if not keep.any():
        raise AllGenesFiltered(rule.describe())
    logger.debug(f"Pre-filter '{rule.describe()}' kept {int(keep.sum())}/{matrix.n_genes} genes")
    return matrix.select_rows(keep)


def collapse_duplicates(matrix: CountMatrix, id_map: IdMap, policy: DuplicatePolicy) -> CountMatrix:
    """Re-key rows to target ids and resolve targets hit by several sources"""
    if len(id_map) == 0:
        return matrix
    mapping = id_map.mapping
    map_order = id_map.order
    groups: Dict[str, List[int]] = {}
    for row, gene_id in enumerate(matrix.gene_ids):
        if gene_id not in mapping:
            raise UnmappedGene(gene_id)
        groups.setdefault(mapping[gene_id], []).append(row)

    targets = list(groups)
    counts = np.empty((len(targets), matrix.n_samples), dtype=np.int64)
    lengths: Optional[np.ndarray] = None if matrix.lengths is None else np.empty(len(targets), dtype=np.int64)
    for i, target in enumerate(targets):
        rows = groups[target]
        if len(rows) == 1 or policy is DuplicatePolicy.KEEP_FIRST:
            first = min(rows, key=lambda r: map_order[matrix.gene_ids[r]])
            counts[i] = matrix.counts[first]
            if lengths is not None:
                lengths[i] = matrix.lengths[first]
        else:
            # counts are non-negative, so half-away-from-zero is floor(x + 0.5)
            counts[i] = np.floor(matrix.counts[rows].sum(axis=0) / len(rows) + 0.5).astype(np.int64)
            if lengths is not None:
                lengths[i] = int(np.floor(matrix.lengths[rows].sum() / len(rows) + 0.5))
    collapsed = sum(len(r) - 1 for r in groups.values())
    if collapsed:
        logger.debug(f"Collapsed {collapsed} duplicated rows with policy {policy.value}")
    return CountMatrix(tuple(targets), matrix.samples, counts, lengths)


def size_factors(matrix: CountMatrix) -> np.ndarray:
    """Median-of-ratios size factors rescaled to geometric mean 1"""
    positive = np.all(matrix.counts > 0, axis=1)
    if not positive.any():
        raise NoReferenceGenes()
    reference = matrix.counts[positive].astype(float)
    geomeans = np.exp(np.log(reference).mean(axis=1, keepdims=True))
    factors = np.median(reference / geomeans, axis=0)
    return factors / np.exp(np.mean(np.log(factors)))


def normalized_counts(matrix: CountMatrix) -> np.ndarray:
    return matrix.counts / size_factors(matrix)


def transform(matrix: CountMatrix, method: TransformMethod) -> TransformedMatrix:
    """Continuous log-scale values for FCS engines"""
    method = TransformMethod(method)
    libsizes = matrix.library_sizes
    for sample, size in zip(matrix.samples, libsizes):
        if size <= 0:
            raise ZeroLibrary(sample)
    if method is TransformMethod.LOG_CPM:
        values = np.log2((matrix.counts + 0.5) * 1e6 / (libsizes + 1.0))
    else:
        values = np.log2(matrix.counts / size_factors(matrix) + 1.0)
    return TransformedMatrix(matrix.gene_ids, matrix.samples, values, method)

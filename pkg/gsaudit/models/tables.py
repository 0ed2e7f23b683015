"""
Result tables shared by the preprocessing, DE and enrichment services
"""

from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field


class DeMethod(str, Enum):
    NB_WALD = "nb_wald"
    MODERATED_T = "moderated_t"


class TransformMethod(str, Enum):
    LOG_CPM = "log_cpm"
    SHIFTED_LOG_VST = "shifted_log_vst"


class RankingStat(str, Enum):
    SIGNAL_TO_NOISE = "signal_to_noise"
    T_STATISTIC = "t_statistic"
    DIFF_OF_CLASSES = "diff_of_classes"
    DE_DERIVED = "de_derived"


class EngineTag(str, Enum):
    ORA = "ora"
    GOSEQ = "goseq"
    GSEA_PHENOTYPE = "gsea_phenotype"
    GSEA_PRERANKED = "gsea_preranked"
    PADOG = "padog"


def _readonly(values) -> np.ndarray:
    array = np.array(values, dtype=float, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class TransformedMatrix:
    """Continuous expression values on a log scale"""

    gene_ids: Tuple[str, ...]
    samples: Tuple[str, ...]
    values: np.ndarray
    method: TransformMethod

    def __post_init__(self):
        values = _readonly(self.values)
        if values.shape != (len(self.gene_ids), len(self.samples)):
            raise ValueError("Transformed matrix dimensions do not match ids")
        if not np.all(np.isfinite(values)):
            raise ValueError("Transformed values must be finite")
        object.__setattr__(self, "values", values)

    def write_tsv(self, path) -> None:
        frame = pd.DataFrame(self.values, index=pd.Index(self.gene_ids, name="gene_id"), columns=list(self.samples))
        frame.to_csv(path, sep="\t", lineterminator="\n")


@dataclass(frozen=True, eq=False)
class DeTable:
    """Per-gene differential expression evidence"""

    gene_ids: Tuple[str, ...]
    log2_fold_change: np.ndarray
    statistic: np.ndarray
    raw_p: np.ndarray
    adjusted_p: np.ndarray
    method: DeMethod

    def __post_init__(self):
        for name in ("log2_fold_change", "statistic", "raw_p", "adjusted_p"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))

    def __len__(self) -> int:
        return len(self.gene_ids)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "log2_fold_change": self.log2_fold_change,
                "statistic": self.statistic,
                "raw_p": self.raw_p,
                "adjusted_p": self.adjusted_p,
            },
            index=pd.Index(self.gene_ids, name="gene_id"),
        )

    def write_tsv(self, path) -> None:
        self.to_frame().to_csv(path, sep="\t", lineterminator="\n")


@dataclass(frozen=True, eq=False)
class RankedList:
    """Genes ordered by descending statistic, ties broken by gene id"""

    gene_ids: Tuple[str, ...]
    statistic: np.ndarray
    stat: RankingStat

    def __post_init__(self):
        object.__setattr__(self, "gene_ids", tuple(self.gene_ids))
        object.__setattr__(self, "statistic", _readonly(self.statistic))

    def __len__(self) -> int:
        return len(self.gene_ids)

    def write_tsv(self, path) -> None:
        frame = pd.DataFrame({"statistic": self.statistic}, index=pd.Index(self.gene_ids, name="gene_id"))
        frame.to_csv(path, sep="\t", lineterminator="\n")


class EnrichmentRow(BaseModel):
    """One gene set in an enrichment result"""
    set_name: str
    statistic: float
    raw_p: float = Field(ge=0.0, le=1.0)
    adjusted: float = Field(ge=0.0, le=1.0)
    dense_rank: int = 0
    relative_rank: float = 1.0
    significant: bool = False


class EnrichmentTable(BaseModel):
    """Per-engine enrichment result with ranks"""
    engine: EngineTag
    threshold: float
    rows: List[EnrichmentRow] = Field(default_factory=list)
    notes: Dict[str, str] = Field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.rows)

    def get(self, set_name: str) -> Optional[EnrichmentRow]:
        for row in self.rows:
            if row.set_name == set_name:
                return row
        return None

    @property
    def significant_count(self) -> int:
        return sum(1 for row in self.rows if row.significant)

    def to_frame(self) -> pd.DataFrame:
        columns = ["set", "statistic", "raw_p", "adjusted", "dense_rank", "relative_rank", "significant"]
        records = [
            [r.set_name, r.statistic, r.raw_p, r.adjusted, r.dense_rank, r.relative_rank, r.significant]
            for r in self.rows
        ]
        return pd.DataFrame(records, columns=columns)

    def write_tsv(self, path) -> None:
        self.to_frame().to_csv(path, sep="\t", index=False, lineterminator="\n")

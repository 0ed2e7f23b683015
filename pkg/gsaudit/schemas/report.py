"""
Study report schemas for GSA Audit
"""

from pydantic import BaseModel, Field
from typing import Any, Dict, List, Optional

from gsaudit.schemas.trace import OptimizationTrace


class ReportMeta(BaseModel):
    """Audit trail carried by every output: tool version, seed and resolved configuration"""
    tool: str
    version: str
    seed: int
    config: Dict[str, Any] = Field(default_factory=dict)
    settings: Dict[str, Any] = Field(default_factory=dict)


class SettingRecord(BaseModel):
    """Schema for one optimisation setting (goal x labeling x engine x target)"""
    key: str
    goal: str
    engine: str
    labeling: str
    labeling_index: int
    target: Optional[str] = None
    seed: int
    default_objective: float
    final_objective: float
    global_objective: Optional[float] = None
    improved: bool = False
    failed: bool = False
    error: Optional[str] = None
    trace_file: Optional[str] = None

    # Kept in memory for artifact writing, never serialised into the report
    trace: Optional[OptimizationTrace] = Field(default=None, exclude=True)

    @property
    def is_permuted(self) -> bool:
        return self.labeling_index > 0


class SummaryRow(BaseModel):
    """Schema for per engine/goal aggregates"""
    engine: str
    goal: str
    settings: int
    improved: int
    failed: int = 0
    median_improvement: float = 0.0
    max_improvement: float = 0.0
    zero_to_positive: Optional[int] = None


class StudyReport(BaseModel):
    """Schema for a complete study run"""
    meta: ReportMeta
    records: List[SettingRecord] = Field(default_factory=list)
    summary: List[SummaryRow] = Field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

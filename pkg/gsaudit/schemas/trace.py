"""
Optimisation trace schemas for GSA Audit
"""

from pydantic import BaseModel, Field
from typing import Dict, List, Optional


class EvaluatedOption(BaseModel):
    """One option tried at a step, with its objective"""
    option: str
    objective: float
    failed: bool = False
    error: Optional[str] = None


class StepRecord(BaseModel):
    """Schema for one step of the stepwise optimisation"""
    choice: str
    kind: str
    incumbent: str
    evaluated: List[EvaluatedOption] = Field(default_factory=list)
    adopted: str
    objective_before: float
    objective_after: float

    @property
    def improved(self) -> bool:
        return self.adopted != self.incumbent


class OptimizationTrace(BaseModel):
    """Schema for a complete stepwise optimisation run"""
    engine: str
    goal: str
    default_config: Dict[str, str]
    default_objective: float
    default_failed: bool = False
    steps: List[StepRecord] = Field(default_factory=list)
    final_objective: float
    final_config: Dict[str, str]
    evaluations: int = 0

    def objective_path(self) -> List[float]:
        """Current optimum after each step, starting from the default"""
        return [self.default_objective] + [step.objective_after for step in self.steps]

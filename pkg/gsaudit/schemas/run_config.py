"""
Run configuration schemas for GSA Audit
"""

from pathlib import Path
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator

from gsaudit.models.choices import GoalKind

KNOWN_ENGINES = ("ora", "ease", "goseq", "gsea", "gsea_preranked", "cp_gsea", "padog")


class RunConfig(BaseModel):
    """Study manifest; flags on the command line map one-to-one onto these keys"""

    counts: Path
    labels: Path
    collection: Path
    alt_collection: Optional[Path] = None
    id_map: Optional[Path] = None
    lengths: Optional[Path] = None

    engines: List[str] = Field(default_factory=lambda: ["ora"])
    goals: List[GoalKind] = Field(default_factory=lambda: [GoalKind.MAX_DEGS])
    targets: List[str] = Field(default_factory=list)

    permutations: int = Field(default=10, ge=0)
    include_true_labels: bool = True
    min_hamming: int = Field(default=0, ge=0)
    seed: int

    engine_permutations: Optional[int] = Field(default=None, ge=1)
    goseq_resamples: Optional[int] = Field(default=None, ge=1)
    min_set_size: Optional[int] = Field(default=None, ge=1)
    max_set_size: Optional[int] = Field(default=None, ge=1)
    choice_order: Dict[str, List[str]] = Field(default_factory=dict)

    threads: int = Field(default=1, ge=1)
    global_gap: bool = False
    out: Path = Path("results")

    @field_validator("engines")
    @classmethod
    def known_engines(cls, engines: List[str]) -> List[str]:
        unknown = [e for e in engines if e not in KNOWN_ENGINES]
        if unknown:
            raise ValueError(f"Unsupported engines {unknown}; choose from {list(KNOWN_ENGINES)}")
        return engines

    @field_validator("choice_order")
    @classmethod
    def known_order_engines(cls, order: Dict[str, List[str]]) -> Dict[str, List[str]]:
        unknown = [e for e in order if e not in KNOWN_ENGINES]
        if unknown:
            raise ValueError(f"choice_order names unsupported engines {unknown}")
        for engine, ids in order.items():
            if len(set(ids)) != len(ids):
                raise ValueError(f"choice_order for {engine} repeats a choice id")
        return order

    @model_validator(mode="after")
    def check_consistency(self) -> "RunConfig":
        for name in ("counts", "labels", "collection", "alt_collection", "id_map", "lengths"):
            path = getattr(self, name)
            if path is not None and not path.is_file():
                raise ValueError(f"{name} file not found: {path}")
        needs_target = any(g is not GoalKind.MAX_DEGS for g in self.goals)
        if needs_target and not self.targets:
            raise ValueError("Goals min-adjp and min-relrank need at least one --target-set")
        if self.targets and not needs_target:
            raise ValueError("Target sets are only used by goals min-adjp and min-relrank")
        if self.permutations == 0 and not self.include_true_labels:
            raise ValueError("No labelings to analyse: permutations is 0 and true labels are excluded")
        if self.min_set_size and self.max_set_size and self.min_set_size > self.max_set_size:
            raise ValueError("min_set_size exceeds max_set_size")
        return self


class SimSpec(BaseModel):
    """Synthetic corpus parameters"""

    genes: int = Field(default=2000, ge=1)
    samples: Tuple[int, int] = (10, 10)
    base_mean: float = Field(default=100.0, gt=0)
    dispersion: float = Field(default=0.1, gt=0)
    within_set_correlation: float = Field(default=0.0, ge=0, lt=1)
    de_fraction: float = Field(default=0.0, ge=0, le=1)
    lfc: float = 0.0
    seed: int = 0

    n_sets: int = Field(default=0, ge=0)
    set_size: Tuple[int, int] = (15, 60)
    enriched_sets: int = Field(default=0, ge=0)
    duplicate_fraction: float = Field(default=0.0, ge=0, lt=1)
    with_lengths: bool = True

    @field_validator("samples")
    @classmethod
    def positive_groups(cls, samples: Tuple[int, int]) -> Tuple[int, int]:
        if min(samples) < 1:
            raise ValueError("Each group needs at least one sample")
        return samples

    @field_validator("set_size")
    @classmethod
    def ordered_sizes(cls, size: Tuple[int, int]) -> Tuple[int, int]:
        if not 1 <= size[0] <= size[1]:
            raise ValueError("Set size bounds must satisfy 1 <= min <= max")
        return size

    @model_validator(mode="after")
    def attainable(self) -> "SimSpec":
        if self.within_set_correlation * (1.0 + self.dispersion) >= 1.0:
            raise ValueError("Within-set correlation unattainable at this dispersion (needs rho * (1 + alpha) < 1)")
        if self.enriched_sets > self.n_sets:
            raise ValueError("Cannot enrich more sets than are generated")
        return self

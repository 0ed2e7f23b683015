"""
Choice graph data model: analytical decisions with defaults, ordered
alternatives and dependencies, plus optimisation goals
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterator, List, Mapping, Optional, Tuple

Configuration = Dict[str, str]


class ChoiceKind(str, Enum):
    PREPROCESSING = "preprocessing"
    PARAMETER = "parameter"


class GoalKind(str, Enum):
    MAX_DEGS = "max-degs"
    MIN_ADJP = "min-adjp"
    MIN_REL_RANK = "min-relrank"


@dataclass(frozen=True)
class OptionSpec:
    id: str
    label: str = ""


@dataclass(frozen=True)
class ChoicePoint:
    """One uncertain analytical choice

    The first active option is the default; the remaining options keep their
    declared order, which is the tie-break order. When depends_on is set, the
    option list is looked up by the option adopted for that upstream choice.
    """

    id: str
    kind: ChoiceKind
    options: Tuple[OptionSpec, ...] = ()
    depends_on: Optional[str] = None
    conditional_options: Mapping[str, Tuple[OptionSpec, ...]] = field(default_factory=dict)

    def active_options(self, assignment: Mapping[str, str]) -> Tuple[OptionSpec, ...]:
        if self.depends_on is None:
            return self.options
        return tuple(self.conditional_options.get(assignment.get(self.depends_on, ""), ()))

    def option_ids(self, assignment: Mapping[str, str]) -> List[str]:
        return [o.id for o in self.active_options(assignment)]

    def default_option(self, assignment: Mapping[str, str]) -> Optional[str]:
        options = self.active_options(assignment)
        return options[0].id if options else None


@dataclass(frozen=True)
class Goal:
    kind: GoalKind
    target: Optional[str] = None

    def __post_init__(self):
        if self.kind is not GoalKind.MAX_DEGS and not self.target:
            raise ValueError(f"Goal {self.kind.value} needs a target gene set")
        if self.kind is GoalKind.MAX_DEGS and self.target:
            raise ValueError("Goal max-degs takes no target gene set")

    @property
    def maximise(self) -> bool:
        return self.kind is GoalKind.MAX_DEGS

    @property
    def worst(self) -> float:
        return 0.0 if self.maximise else 1.0

    def improvement(self, new: float, old: float) -> float:
        """Signed gain of new over old; positive means better"""
        return new - old if self.maximise else old - new

    def better(self, new: float, old: float) -> bool:
        return self.improvement(new, old) > 0

    def describe(self) -> str:
        return self.kind.value if self.target is None else f"{self.kind.value}:{self.target}"


@dataclass(frozen=True)
class ChoiceGraph:
    """Ordered choice points for one engine and goal"""

    points: Tuple[ChoicePoint, ...]
    engine: str
    goal: Goal

    def __post_init__(self):
        ids = [p.id for p in self.points]
        if len(set(ids)) != len(ids):
            raise ValueError(f"Duplicate choice ids in graph: {ids}")
        for index, point in enumerate(self.points):
            if point.depends_on is not None and point.depends_on not in ids[:index]:
                raise ValueError(f"Choice {point.id} depends on {point.depends_on}, which must come earlier")

    def __len__(self) -> int:
        return len(self.points)

    @property
    def kinds(self) -> Dict[str, ChoiceKind]:
        return {p.id: p.kind for p in self.points}

    def resolve(self, assignment: Mapping[str, str]) -> Configuration:
        """Complete an assignment: unknown or inactive options fall back to the resolved default"""
        resolved: Configuration = {}
        for point in self.points:
            options = point.option_ids(resolved)
            if not options:
                continue
            chosen = assignment.get(point.id)
            resolved[point.id] = chosen if chosen in options else options[0]
        return resolved

    def defaults(self) -> Configuration:
        return self.resolve({})

    def canonical_key(self, assignment: Mapping[str, str]) -> Tuple[Tuple[str, str], ...]:
        return tuple(sorted(self.resolve(assignment).items()))

    def enumerate_configurations(self) -> Iterator[Configuration]:
        """Dependency-resolved Cartesian product in declared option order"""

        def expand(index: int, partial: Configuration) -> Iterator[Configuration]:
            if index == len(self.points):
                yield dict(partial)
                return
            point = self.points[index]
            options = point.option_ids(partial)
            if not options:
                yield from expand(index + 1, partial)
                return
            for option in options:
                partial[point.id] = option
                yield from expand(index + 1, partial)
                del partial[point.id]

        yield from expand(0, {})

    def size(self) -> int:
        return sum(1 for _ in self.enumerate_configurations())

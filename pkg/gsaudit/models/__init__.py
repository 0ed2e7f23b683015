"""Models module"""
from gsaudit.models.corpus import CountMatrix, ConditionLabels, GeneSetCollection, IdMap
from gsaudit.models.tables import (
    DeTable, RankedList, TransformedMatrix, EnrichmentTable, EnrichmentRow,
    DeMethod, TransformMethod, RankingStat, EngineTag,
)
from gsaudit.models.choices import ChoicePoint, ChoiceGraph, OptionSpec, Goal, GoalKind, ChoiceKind

"""
Corpus data model: count matrix, condition labels, gene set collections, id maps
"""

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Tuple

import numpy as np
import pandas as pd

from gsaudit.utils.exceptions import DuplicateGeneId, DuplicateSetName, DuplicateSource, EmptyGroup, TooManyConditions


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class CountMatrix:
    """Integer gene-by-sample counts with unique gene ids"""

    gene_ids: Tuple[str, ...]
    samples: Tuple[str, ...]
    counts: np.ndarray
    lengths: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "gene_ids", tuple(self.gene_ids))
        object.__setattr__(self, "samples", tuple(self.samples))
        counts = np.asarray(self.counts)
        if counts.ndim != 2 or counts.shape != (len(self.gene_ids), len(self.samples)):
            raise ValueError(
                f"Count matrix shape {counts.shape} does not match "
                f"{len(self.gene_ids)} genes x {len(self.samples)} samples"
            )
        if counts.size and (counts.min() < 0 or not np.all(np.equal(np.mod(counts, 1), 0))):
            raise ValueError("Counts must be non-negative integers")
        seen = set()
        for gene_id in self.gene_ids:
            if gene_id in seen:
                raise DuplicateGeneId(gene_id)
            seen.add(gene_id)
        if len(set(self.samples)) != len(self.samples):
            raise ValueError("Sample names must be unique")
        object.__setattr__(self, "counts", _frozen(counts.astype(np.int64)))
        if self.lengths is not None:
            lengths = np.asarray(self.lengths)
            if lengths.shape != (len(self.gene_ids),) or (lengths.size and lengths.min() < 1):
                raise ValueError("Gene lengths must be positive integers, one per gene")
            object.__setattr__(self, "lengths", _frozen(lengths.astype(np.int64)))

    @property
    def n_genes(self) -> int:
        return len(self.gene_ids)

    @property
    def n_samples(self) -> int:
        return len(self.samples)

    @property
    def library_sizes(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    def select_rows(self, mask: np.ndarray) -> "CountMatrix":
        """Keep rows where mask is True, order preserved"""
        mask = np.asarray(mask, dtype=bool)
        return CountMatrix(
            gene_ids=tuple(g for g, keep in zip(self.gene_ids, mask) if keep),
            samples=self.samples,
            counts=self.counts[mask],
            lengths=None if self.lengths is None else self.lengths[mask],
        )

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.counts, index=pd.Index(self.gene_ids, name="gene_id"), columns=list(self.samples))
        if self.lengths is not None:
            frame["length"] = self.lengths
        return frame

    def write_tsv(self, path) -> None:
        """Serialise in the format parse_count_matrix reads"""
        self.to_frame().to_csv(path, sep="\t", lineterminator="\n")

    def __eq__(self, other) -> bool:
        if not isinstance(other, CountMatrix):
            return NotImplemented
        same_lengths = (
            (self.lengths is None and other.lengths is None)
            or (self.lengths is not None and other.lengths is not None
                and np.array_equal(self.lengths, other.lengths))
        )
        return (self.gene_ids == other.gene_ids and self.samples == other.samples
                and np.array_equal(self.counts, other.counts) and same_lengths)

    __hash__ = None


@dataclass(frozen=True)
class ConditionLabels:
    """Binary condition assignment aligned with a matrix's samples

    Conditions are ordered lexicographically; the first is the reference group
    so swapping the two tokens swaps the groups.
    """

    samples: Tuple[str, ...]
    assignment: Tuple[str, ...]
    levels: Tuple[str, str] = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        object.__setattr__(self, "assignment", tuple(self.assignment))
        if len(self.samples) != len(self.assignment):
            raise ValueError("One label per sample required")
        distinct = set(self.assignment)
        if len(distinct) > 2:
            raise TooManyConditions(distinct)
        if len(distinct) < 2:
            raise EmptyGroup(distinct)
        object.__setattr__(self, "levels", tuple(sorted(distinct)))

    @property
    def group_sizes(self) -> Tuple[int, int]:
        first = sum(1 for a in self.assignment if a == self.levels[0])
        return first, len(self.assignment) - first

    @property
    def second_group(self) -> np.ndarray:
        """Boolean mask of samples in the second condition"""
        return np.array([a == self.levels[1] for a in self.assignment], dtype=bool)

    def with_assignment(self, assignment: Iterable[str]) -> "ConditionLabels":
        return ConditionLabels(self.samples, tuple(assignment))

    def from_mask(self, second: np.ndarray) -> "ConditionLabels":
        return self.with_assignment(self.levels[1] if s else self.levels[0] for s in second)


@dataclass(frozen=True)
class GeneSetCollection:
    """Named gene sets in file order"""

    name: str
    sets: Dict[str, FrozenSet[str]]
    descriptions: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        for set_name, members in self.sets.items():
            if not members:
                raise ValueError(f"Gene set {set_name} is empty")

    @classmethod
    def from_entries(cls, name: str, entries: Iterable[Tuple[str, str, Iterable[str]]]) -> "GeneSetCollection":
        sets: Dict[str, FrozenSet[str]] = {}
        descriptions: Dict[str, str] = {}
        for set_name, description, members in entries:
            if set_name in sets:
                raise DuplicateSetName(set_name)
            sets[set_name] = frozenset(members)
            descriptions[set_name] = description
        return cls(name=name, sets=sets, descriptions=descriptions)

    def __len__(self) -> int:
        return len(self.sets)

    @property
    def annotated_genes(self) -> FrozenSet[str]:
        return frozenset().union(*self.sets.values()) if self.sets else frozenset()

    def write_tsv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as out:
            for set_name, members in self.sets.items():
                fields = [set_name, self.descriptions.get(set_name, "")] + sorted(members)
                out.write("\t".join(fields) + "\n")


@dataclass(frozen=True)
class IdMap:
    """Source-to-target gene id mapping in file order (many-to-one allowed)"""

    entries: Tuple[Tuple[str, str], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple((s, t) for s, t in self.entries))
        seen = set()
        for source, _ in self.entries:
            if source in seen:
                raise DuplicateSource(source)
            seen.add(source)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def mapping(self) -> Dict[str, str]:
        return dict(self.entries)

    @property
    def order(self) -> Dict[str, int]:
        return {source: i for i, (source, _) in enumerate(self.entries)}

    @property
    def duplicated_targets(self) -> List[str]:
        counts: Dict[str, int] = {}
        for _, target in self.entries:
            counts[target] = counts.get(target, 0) + 1
        return [t for t, c in counts.items() if c > 1]

    def write_tsv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as out:
            for source, target in self.entries:
                out.write(f"{source}\t{target}\n")

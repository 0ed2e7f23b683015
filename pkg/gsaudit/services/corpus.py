"""
Corpus ingestion for GSA Audit
Parses and validates count matrices, condition labels, gene set collections,
id maps and gene lengths from tab-separated text
"""

import logging
from pathlib import Path
from typing import Dict, List, Mapping, Optional

import numpy as np

from gsaudit.models.corpus import ConditionLabels, CountMatrix, GeneSetCollection, IdMap
from gsaudit.utils.exceptions import (
    CorpusError, DuplicateGeneId, MalformedCell, MalformedLine, MissingLabel, RaggedRow,
)

logger = logging.getLogger(__name__)

LENGTH_COLUMN = "length"


def _read_rows(path) -> List[List[str]]:
    """Split a TSV file into rows, dropping blank lines but keeping line numbers aligned"""
    text = Path(path).read_text(encoding="utf-8")
    return [line.rstrip("\r").split("\t") if line.strip() else [] for line in text.split("\n")]


def _parse_int(value: str, row: int, col: int, minimum: int) -> int:
    try:
        parsed = int(value)
    except ValueError:
        raise MalformedCell(row, col, value) from None
    if parsed < minimum:
        raise MalformedCell(row, col, value)
    return parsed


def parse_count_matrix(path) -> CountMatrix:
    """Parse `gene_id<TAB>s1<TAB>...[<TAB>length]` into a validated CountMatrix"""
    rows = _read_rows(path)
    if not rows or not rows[0]:
        raise CorpusError(f"Count matrix {path} has no header row")
    header = rows[0]
    has_lengths = header[-1] == LENGTH_COLUMN
    samples = header[1:-1] if has_lengths else header[1:]
    if not samples:
        raise CorpusError(f"Count matrix {path} lists no samples")

    gene_ids: List[str] = []
    seen = set()
    counts: List[List[int]] = []
    lengths: List[int] = []
    for line_no, fields in enumerate(rows[1:], start=2):
        if not fields:
            continue
        if len(fields) != len(header):
            raise RaggedRow(line_no)
        gene_id = fields[0]
        if gene_id in seen:
            raise DuplicateGeneId(gene_id)
        seen.add(gene_id)
        gene_ids.append(gene_id)
        counts.append([_parse_int(v, line_no, col, 0) for col, v in enumerate(fields[1:1 + len(samples)], start=2)])
        if has_lengths:
            lengths.append(_parse_int(fields[-1], line_no, len(header), 1))

    matrix = CountMatrix(
        gene_ids=tuple(gene_ids),
        samples=tuple(samples),
        counts=np.array(counts, dtype=np.int64).reshape(len(gene_ids), len(samples)),
        lengths=np.array(lengths, dtype=np.int64) if has_lengths else None,
    )
    logger.info(f"Parsed count matrix {path}: {matrix.n_genes} genes x {matrix.n_samples} samples"
                f"{' with lengths' if has_lengths else ''}")
    return matrix


def parse_labels(path, matrix: CountMatrix) -> ConditionLabels:
    """Parse `sample_id<TAB>label` and align it with the matrix's sample order"""
    by_sample: Dict[str, str] = {}
    for line_no, fields in enumerate(_read_rows(path), start=1):
        if not fields:
            continue
        if len(fields) != 2:
            raise RaggedRow(line_no)
        sample, label = fields
        if sample in by_sample and by_sample[sample] != label:
            raise CorpusError(f"Sample {sample} labelled twice ({by_sample[sample]}, {label})")
        by_sample[sample] = label
    for sample in matrix.samples:
        if sample not in by_sample:
            raise MissingLabel(sample)
    labels = ConditionLabels(matrix.samples, tuple(by_sample[s] for s in matrix.samples))
    logger.info(f"Parsed labels {path}: {labels.levels[0]}={labels.group_sizes[0]}, "
                f"{labels.levels[1]}={labels.group_sizes[1]}")
    return labels


def parse_gene_sets(path, name: Optional[str] = None) -> GeneSetCollection:
    """Parse `name<TAB>description<TAB>member...`, one set per line"""
    entries = []
    for line_no, fields in enumerate(_read_rows(path), start=1):
        if not fields:
            continue
        members = [m for m in fields[2:] if m]
        if len(fields) < 3 or not fields[0] or not members:
            raise MalformedLine(line_no)
        entries.append((fields[0], fields[1], members))
    collection = GeneSetCollection.from_entries(name or Path(path).stem, entries)
    logger.info(f"Parsed gene set collection {collection.name}: {len(collection)} sets")
    return collection


def parse_id_map(path) -> IdMap:
    """Parse `source_id<TAB>target_id`; file order is kept for the keep-first policy"""
    entries = []
    for line_no, fields in enumerate(_read_rows(path), start=1):
        if not fields:
            continue
        if len(fields) != 2:
            raise RaggedRow(line_no)
        entries.append((fields[0], fields[1]))
    id_map = IdMap(tuple(entries))
    logger.info(f"Parsed id map {path}: {len(id_map)} entries, "
                f"{len(id_map.duplicated_targets)} duplicated targets")
    return id_map


def parse_lengths(path) -> Dict[str, int]:
    """Parse `gene_id<TAB>length`"""
    lengths: Dict[str, int] = {}
    for line_no, fields in enumerate(_read_rows(path), start=1):
        if not fields:
            continue
        if len(fields) != 2:
            raise RaggedRow(line_no)
        if fields[0] in lengths:
            raise DuplicateGeneId(fields[0])
        lengths[fields[0]] = _parse_int(fields[1], line_no, 2, 1)
    return lengths


def attach_lengths(matrix: CountMatrix, lengths: Mapping[str, int]) -> CountMatrix:
    """Return the matrix with lengths from a separate file; genes without one disable the option"""
    missing = [g for g in matrix.gene_ids if g not in lengths]
    if missing:
        logger.warning(f"{len(missing)} genes have no length (first: {missing[0]}); transcript-length bias disabled")
        return CountMatrix(matrix.gene_ids, matrix.samples, matrix.counts, None)
    return CountMatrix(matrix.gene_ids, matrix.samples, matrix.counts,
                       np.array([lengths[g] for g in matrix.gene_ids], dtype=np.int64))


def write_labels(labels: ConditionLabels, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as out:
        for sample, label in zip(labels.samples, labels.assignment):
            out.write(f"{sample}\t{label}\n")

"""
Synthetic data service for GSA Audit
Seeded negative-binomial RNA-seq counts with optional within-set correlation
and spiked differential signal
"""

import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from gsaudit.models.corpus import ConditionLabels, CountMatrix, GeneSetCollection, IdMap
from gsaudit.schemas.run_config import SimSpec
from gsaudit.services.corpus import write_labels
from gsaudit.utils.exceptions import MissingSets
from gsaudit.utils.seeding import rng_for

logger = logging.getLogger(__name__)

GENE_MEAN_SDLOG = 0.5
LENGTH_MEDIAN = 2000.0
LENGTH_SDLOG = 0.6
MIN_LENGTH = 100
CONDITIONS = ("A", "B")


@dataclass(frozen=True)
class SimulatedCorpus:
    counts: CountMatrix
    labels: ConditionLabels
    truth: Dict[str, List[str]]
    collections: Tuple[GeneSetCollection, ...] = ()
    id_map: Optional[IdMap] = None
    spec: Optional[SimSpec] = field(default=None, compare=False)


def make_gene_ids(n_genes: int) -> List[str]:
    width = max(5, len(str(n_genes)))
    return [f"G{i + 1:0{width}d}" for i in range(n_genes)]


def generate_collection(gene_ids: Sequence[str], n_sets: int, seed: int, size: Tuple[int, int] = (15, 60),
                        name: str = "collection_a") -> GeneSetCollection:
    """Random gene sets, sizes uniform in the given bounds (capped at the gene count)"""
    rng = rng_for(seed, "collection", name)
    genes = np.asarray(gene_ids, dtype=object)
    lo, hi = min(size[0], len(genes)), min(size[1], len(genes))
    entries = []
    for j in range(n_sets):
        k = int(rng.integers(lo, hi + 1))
        members = rng.choice(genes, size=k, replace=False)
        entries.append((f"SET{j + 1:03d}", f"synthetic set {j + 1} of {name}", [str(m) for m in members]))
    return GeneSetCollection.from_entries(name, entries)


def make_id_map(gene_ids: Sequence[str], duplicate_fraction: float, seed: int) -> IdMap:
    """Each gene maps to itself, except a fraction that shares the previous gene's target"""
    rng = rng_for(seed, "idmap")
    entries = []
    target = None
    for i, gene in enumerate(gene_ids):
        if i == 0 or rng.random() >= duplicate_fraction:
            target = gene
        entries.append((gene, target))
    return IdMap(tuple(entries))


def latent_variance(correlation: float, dispersion: float, mean: float) -> float:
    """Variance of the mean-one latent factor giving the requested count correlation"""
    return correlation * (dispersion + 1.0 / mean) / (1.0 - correlation * (1.0 + dispersion))


def _first_set(gene_ids: Sequence[str], sets: Optional[GeneSetCollection]) -> Dict[str, str]:
    owner: Dict[str, str] = {}
    if sets is not None:
        for set_name, members in sets.sets.items():
            for gene in members:
                owner.setdefault(gene, set_name)
    return owner


def simulate(spec: SimSpec, sets: Optional[GeneSetCollection] = None) -> SimulatedCorpus:
    """Gamma-Poisson counts; genes of a set share a per-sample log-normal factor"""
    if (spec.within_set_correlation > 0 or spec.enriched_sets > 0) and (sets is None or len(sets) == 0):
        raise MissingSets()
    n1, n2 = spec.samples
    gene_ids = make_gene_ids(spec.genes)
    samples = [f"S{j + 1:02d}" for j in range(n1 + n2)]
    second = np.arange(n1 + n2) >= n1
    labels = ConditionLabels(tuple(samples), tuple(CONDITIONS[int(s)] for s in second))

    rng_de = rng_for(spec.seed, "de")
    enriched: List[str] = []
    if spec.enriched_sets:
        names = list(sets.sets)
        picked = set(rng_de.choice(len(names), size=spec.enriched_sets, replace=False).tolist())
        enriched = [n for i, n in enumerate(names) if i in picked]
        pool = [g for g in gene_ids if any(g in sets.sets[n] for n in enriched)]
    else:
        pool = list(gene_ids)
    n_de = int(round(spec.de_fraction * len(pool)))
    de_genes = set(rng_de.choice(np.asarray(pool, dtype=object), size=n_de, replace=False).tolist()) if n_de else set()

    owner = _first_set(gene_ids, sets)
    latent: Dict[str, np.ndarray] = {}
    if spec.within_set_correlation > 0:
        v = latent_variance(spec.within_set_correlation, spec.dispersion, spec.base_mean)
        sdlog = np.sqrt(np.log1p(v))
        for set_name in sets.sets:
            latent[set_name] = rng_for(spec.seed, "latent", set_name).lognormal(-sdlog ** 2 / 2.0, sdlog, n1 + n2)

    fold = 2.0 ** spec.lfc
    shape = 1.0 / spec.dispersion
    counts = np.empty((spec.genes, n1 + n2), dtype=np.int64)
    lengths = np.empty(spec.genes, dtype=np.int64)
    for i, gene in enumerate(gene_ids):
        # per-gene stream: mean, length, then gamma and Poisson draws
        rng = rng_for(spec.seed, "gene", i)
        mu = spec.base_mean * rng.lognormal(-GENE_MEAN_SDLOG ** 2 / 2.0, GENE_MEAN_SDLOG)
        lengths[i] = max(MIN_LENGTH, int(round(rng.lognormal(np.log(LENGTH_MEDIAN), LENGTH_SDLOG))))
        means = np.full(n1 + n2, mu)
        if gene in de_genes:
            means[second] *= fold
        if gene in owner and owner[gene] in latent:
            means = means * latent[owner[gene]]
        counts[i] = rng.poisson(rng.gamma(shape, means * spec.dispersion))

    matrix = CountMatrix(tuple(gene_ids), tuple(samples), counts, lengths if spec.with_lengths else None)
    effect = spec.lfc != 0 and bool(de_genes)
    truth = {
        "de_genes": sorted(de_genes) if effect else [],
        "enriched_sets": enriched if effect else [],
    }
    logger.info(f"Simulated {spec.genes} genes x {n1 + n2} samples, {len(truth['de_genes'])} DE genes")
    return SimulatedCorpus(matrix, labels, truth, spec=spec)


def simulate_corpus(spec: SimSpec) -> SimulatedCorpus:
    """Full synthetic corpus: two collections, optional id map, counts and truth"""
    gene_ids = make_gene_ids(spec.genes)
    collections: Tuple[GeneSetCollection, ...] = ()
    sets = None
    if spec.n_sets:
        sets = generate_collection(gene_ids, spec.n_sets, spec.seed, spec.set_size, "collection_a")
        alternative = generate_collection(gene_ids, spec.n_sets, spec.seed, spec.set_size, "collection_b")
        collections = (sets, alternative)
    corpus = simulate(spec, sets)
    id_map = make_id_map(gene_ids, spec.duplicate_fraction, spec.seed) if spec.duplicate_fraction > 0 else None
    return SimulatedCorpus(corpus.counts, corpus.labels, corpus.truth, collections, id_map, spec)


def _replace_into(path: Path, writer) -> None:
    tmp = path.with_name(path.name + ".tmp")
    writer(tmp)
    os.replace(tmp, path)


def write_corpus(corpus: SimulatedCorpus, out_dir) -> Dict[str, Path]:
    """Write counts, labels, collections, id map, lengths and truth.json in the corpus formats"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: Dict[str, Path] = {}

    def emit(key: str, name: str, writer) -> None:
        path = out_dir / name
        _replace_into(path, writer)
        written[key] = path

    emit("counts", "counts.tsv", corpus.counts.write_tsv)
    emit("labels", "labels.tsv", lambda p: write_labels(corpus.labels, p))
    for key, collection in zip(("collection", "alt_collection"), corpus.collections):
        emit(key, f"{collection.name}.tsv", collection.write_tsv)
    if corpus.id_map is not None:
        emit("id_map", "id_map.tsv", corpus.id_map.write_tsv)
    if corpus.counts.lengths is not None:
        def write_lengths(path: Path) -> None:
            with open(path, "w", encoding="utf-8", newline="\n") as out:
                for gene, length in zip(corpus.counts.gene_ids, corpus.counts.lengths):
                    out.write(f"{gene}\t{int(length)}\n")
        emit("lengths", "lengths.tsv", write_lengths)

    truth = dict(corpus.truth)
    if corpus.spec is not None:
        truth["spec"] = corpus.spec.model_dump(mode="json")

    def write_truth(path: Path) -> None:
        path.write_text(json.dumps(truth, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    emit("truth", "truth.json", write_truth)
    logger.info(f"Wrote synthetic corpus to {out_dir}")
    return written

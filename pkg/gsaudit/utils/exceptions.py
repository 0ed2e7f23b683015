"""
Named errors raised across GSA Audit

Every error derives from AuditError so callers (the optimiser, the CLI) can
tell domain failures from programming errors.
"""


class AuditError(Exception):
    """Base class for all domain errors"""


# Corpus

class CorpusError(AuditError, ValueError):
    """Malformed or inconsistent input file"""


class DuplicateGeneId(CorpusError):
    def __init__(self, gene_id: str):
        self.gene_id = gene_id
        super().__init__(f"Duplicate gene id: {gene_id}")


class MalformedCell(CorpusError):
    def __init__(self, row: int, col: int, value: str = ""):
        self.row = row
        self.col = col
        super().__init__(f"Malformed cell at row {row}, column {col}: {value!r}")


class RaggedRow(CorpusError):
    def __init__(self, row: int):
        self.row = row
        super().__init__(f"Row {row} has the wrong number of fields")


class MissingLabel(CorpusError):
    def __init__(self, sample: str):
        self.sample = sample
        super().__init__(f"No condition label for sample {sample}")


class TooManyConditions(CorpusError):
    def __init__(self, labels):
        self.labels = sorted(labels)
        super().__init__(f"Expected exactly two conditions, found {self.labels}")


class EmptyGroup(CorpusError):
    def __init__(self, labels=()):
        self.labels = sorted(labels)
        super().__init__(f"Only one condition present: {self.labels}")


class DuplicateSetName(CorpusError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"Duplicate gene set name: {name}")


class MalformedLine(CorpusError):
    def __init__(self, line: int):
        self.line = line
        super().__init__(f"Line {line} needs at least name, description and one member")


class DuplicateSource(CorpusError):
    def __init__(self, source: str):
        self.source = source
        super().__init__(f"Source id mapped twice: {source}")


# Preprocessing

class PreprocessError(AuditError, ValueError):
    """Preprocessing could not produce a usable matrix"""


class ZeroLibrary(PreprocessError):
    def __init__(self, sample: str):
        self.sample = sample
        super().__init__(f"Library size of sample {sample} is zero")


class AllGenesFiltered(PreprocessError):
    def __init__(self, rule: str = ""):
        self.rule = rule
        super().__init__(f"Pre-filter removed every gene ({rule})" if rule else "Pre-filter removed every gene")


class UnmappedGene(PreprocessError):
    def __init__(self, gene_id: str):
        self.gene_id = gene_id
        super().__init__(f"Gene {gene_id} is missing from the id map")


class NoReferenceGenes(PreprocessError):
    def __init__(self):
        super().__init__("No gene has positive counts in every sample")


# Differential expression

class DiffExprError(AuditError, ValueError):
    """Differential expression cannot be computed"""


class DegenerateDesign(DiffExprError):
    def __init__(self, sizes):
        self.sizes = tuple(sizes)
        super().__init__(f"Each condition needs at least two samples, got {self.sizes}")


class InvalidP(DiffExprError):
    def __init__(self, value: float):
        self.value = value
        super().__init__(f"p-value outside [0, 1]: {value}")


# Enrichment

class EnrichmentError(AuditError, ValueError):
    """Gene set test cannot be computed"""


class InvalidContingency(EnrichmentError):
    def __init__(self, k, N, K, n):
        super().__init__(f"Invalid contingency k={k}, N={N}, K={K}, n={n}")


class NonpositiveOdds(EnrichmentError):
    def __init__(self, omega: float):
        super().__init__(f"Odds ratio must be positive, got {omega}")


class EmptyUniverse(EnrichmentError):
    def __init__(self):
        super().__init__("Universe is empty")


class DegeneratePwf(EnrichmentError):
    def __init__(self):
        super().__init__("Probability weighting function needs both DE and non-DE genes")


class BiasUnavailable(EnrichmentError):
    def __init__(self, bias: str, gene_id: str = ""):
        self.gene_id = gene_id
        super().__init__(f"Bias covariate {bias} unavailable {gene_id}".strip())


class EmptySetInList(EnrichmentError):
    def __init__(self):
        super().__init__("No set member is present in the ranked list")


class NoComplement(EnrichmentError):
    def __init__(self):
        super().__init__("Set covers the whole ranked list")


class EmptyCollectionAfterFilter(EnrichmentError):
    def __init__(self, min_size: int, max_size: int):
        super().__init__(f"No gene set within size bounds [{min_size}, {max_size}]")


class EmptyTable(EnrichmentError):
    def __init__(self):
        super().__init__("Enrichment table has no rows")


# Multiverse

class MultiverseError(AuditError, ValueError):
    """Choice graph or search failure"""


class UnknownEngine(MultiverseError):
    def __init__(self, engine: str):
        self.engine = engine
        super().__init__(f"Unsupported engine: {engine}")


class SearchSpaceTooLarge(MultiverseError):
    def __init__(self, size: int, cap: int):
        self.size = size
        self.cap = cap
        super().__init__(f"Search space of {size} configurations exceeds cap {cap}")


class InvalidChoiceOrder(MultiverseError):
    def __init__(self, engine: str, reason: str):
        self.engine = engine
        super().__init__(f"Invalid choice order for {engine}: {reason}")


# Study

class StudyError(AuditError, ValueError):
    """Study orchestration failure"""


class InsufficientPermutations(StudyError):
    def __init__(self, requested: int, available: int):
        self.requested = requested
        self.available = available
        super().__init__(f"Requested {requested} permutations, only {available} distinct arrangements exist")


class EmptyReport(StudyError):
    def __init__(self):
        super().__init__("Report has no settings")


# Simulation

class SimulationError(AuditError, ValueError):
    """Invalid simulation request"""


class MissingSets(SimulationError):
    def __init__(self):
        super().__init__("Within-set correlation requested without gene sets")


# Command line

class InvalidRunConfig(AuditError, ValueError):
    """Flags or config file cannot form a valid run"""

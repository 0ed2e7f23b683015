import unittest

import numpy as np

from gsaudit.models.choices import Goal, GoalKind
from gsaudit.models.tables import RankingStat, TransformMethod
from gsaudit.schemas.run_config import SimSpec
from gsaudit.services import preprocess
from gsaudit.services.enrichment import EsConfig, gsea_phenotype
from gsaudit.services.multiverse import EngineOptions, PipelineEvaluator, StudyInputs, build_graph
from gsaudit.services.study import generate_permutations
from gsaudit.services.synthdata import simulate_corpus

MAX_DEGS = Goal(GoalKind.MAX_DEGS)


def null_study(seed, genes=1000, samples=(5, 5), n_sets=50, correlation=0.0):
    spec = SimSpec(genes=genes, samples=samples, n_sets=n_sets, set_size=(15, 60),
                   within_set_correlation=correlation, seed=seed)
    corpus = simulate_corpus(spec)
    return StudyInputs(corpus.counts, corpus.labels, corpus.collections)


def default_table(inputs, engine, seed, options):
    graph = build_graph(engine, MAX_DEGS, inputs.capabilities)
    result = PipelineEvaluator(inputs, graph, seed, options).evaluate(graph.defaults())
    assert not result.failed, result.error
    return result.table


class TestNullCalibration(unittest.TestCase):
    """Engine calibration on synthetic data without any differential signal"""

    def test_ora_null_degs(self):
        """Mean DEGS of ORA + BH on permuted null labels stays at or below 0.2.

        Reduced scale: 1,000 genes, 5+5 samples, 50 sets and 20 seeds.
        """
        counts = []
        for seed in range(20):
            inputs = null_study(seed)
            permuted = generate_permutations(inputs.labels, 1, seed)[0].labels
            table = default_table(inputs.with_labels(permuted), "ora", seed, EngineOptions())
            counts.append(table.significant_count)
        self.assertLessEqual(np.mean(counts), 0.2)

    def test_padog_null_p_values(self):
        """PADOG raw p-values average near one half on null data.

        Reduced scale: 1,000 genes, 5+5 samples, 50 sets, 100 permutations and 6 seeds.
        """
        means = []
        for seed in range(6):
            inputs = null_study(100 + seed)
            permuted = generate_permutations(inputs.labels, 1, seed)[0].labels
            table = default_table(inputs.with_labels(permuted), "padog", seed,
                                  EngineOptions(padog_permutations=100))
            means.append(np.mean([row.raw_p for row in table.rows]))
        self.assertTrue(0.35 <= np.mean(means) <= 0.65, means)

    def test_phenotype_gsea_null_q_values(self):
        """Few sets reach q < 0.25 under the sample-permutation null.

        Reduced scale: 500 genes, 5+5 samples, 30 sets, 100 permutations and 6 seeds.
        """
        fractions = []
        for seed in range(6):
            inputs = null_study(200 + seed, genes=500, n_sets=30)
            values = preprocess.transform(inputs.counts, TransformMethod.LOG_CPM)
            table = gsea_phenotype(values, inputs.labels, inputs.collections[0], RankingStat.SIGNAL_TO_NOISE,
                                   EsConfig(permutations=100), seed=seed)
            fractions.append(np.mean([row.adjusted < 0.25 for row in table.rows]))
        self.assertLessEqual(np.mean(fractions), 0.35)


class TestCorrelationInflation(unittest.TestCase):
    """Gene-permutation nulls ignore inter-gene correlation; sample-permutation nulls keep it"""

    def test_preranked_reports_more_sets_than_phenotype(self):
        """With within-set correlation 0.3 on null labels, preranked GSEA calls more sets.

        Reduced scale: 1,000 genes, 5+5 samples, 40 sets and 100 permutations per engine, 10 seeds.
        """
        options = EngineOptions(gsea_permutations=100)
        at_least, strictly = 0, 0
        for seed in range(10):
            inputs = null_study(300 + seed, n_sets=40, correlation=0.3)
            preranked = default_table(inputs, "gsea_preranked", seed, options).significant_count
            phenotype = default_table(inputs, "gsea", seed, options).significant_count
            at_least += preranked >= phenotype
            strictly += preranked > phenotype
        self.assertGreaterEqual(at_least, 7)
        self.assertGreaterEqual(strictly, 5)


if __name__ == "__main__":
    unittest.main()

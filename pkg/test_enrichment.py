import unittest
from fractions import Fraction
from math import comb

import numpy as np

from gsaudit.models.corpus import ConditionLabels, GeneSetCollection
from gsaudit.models.tables import EngineTag, EnrichmentRow, EnrichmentTable, RankedList, RankingStat, TransformedMatrix, TransformMethod
from gsaudit.services.enrichment import (
    EsConfig, GoseqMethod, UniverseChoice, _gsea_significance, assemble_ranks, enrichment_score, goseq,
    gsea_phenotype, gsea_preranked, hypergeom_tail, ora, padog, padog_weights, pwf_fit, wallenius_tail,
)
from gsaudit.utils.exceptions import (
    BiasUnavailable, DegenerateDesign, DegeneratePwf, EmptyCollectionAfterFilter, EmptySetInList, EmptyTable,
    EmptyUniverse, InvalidContingency, NoComplement, NonpositiveOdds,
)


def enumerated_tail(k, N, K, n):
    total = sum(Fraction(comb(K, x) * comb(N - K, n - x)) for x in range(k, min(K, n) + 1))
    return float(total / comb(N, n))


def valid_contingencies(max_n):
    for N in range(1, max_n + 1):
        for K in range(N + 1):
            for n in range(N + 1):
                for k in range(max(0, n + K - N), min(K, n) + 1):
                    yield k, N, K, n


def urn_tail(k, N, K, n, omega, draws, rng):
    """Sequential biased urn: each draw picks a set gene with odds omega"""
    red = np.full(draws, K, dtype=float)
    blue = np.full(draws, N - K, dtype=float)
    taken = np.zeros(draws)
    for _ in range(n):
        p_red = omega * red / (omega * red + blue)
        pick = rng.random(draws) < p_red
        taken += pick
        red -= pick
        blue -= ~pick
    return np.mean(taken >= k)


def ks_oracle(statistic_order, members):
    """Unweighted running sum written out step by step"""
    hits = sum(1 for g in statistic_order if g in members)
    misses = len(statistic_order) - hits
    running, best = 0.0, 0.0
    for g in statistic_order:
        running += 1.0 / hits if g in members else -1.0 / misses
        if abs(running) > abs(best):
            best = running
    return best


def table_with(adjusted):
    rows = [EnrichmentRow(set_name=f"S{i}", statistic=0.0, raw_p=a, adjusted=a) for i, a in enumerate(adjusted)]
    return EnrichmentTable(engine=EngineTag.ORA, threshold=0.05, rows=rows)


def ten_gene_sets():
    genes = {f"g{i:02d}" for i in range(1, 11)}
    sets = GeneSetCollection.from_entries("toy", [
        ("S1", "", ["g01", "g02", "g03", "g04"]),
        ("S2", "", ["g05", "g06", "g07", "g08", "g09", "g10"]),
    ])
    return genes, sets


def toy_expression(rng, n_genes=120, assignment="AAAABBBB"):
    genes = tuple(f"g{i:03d}" for i in range(n_genes))
    samples = tuple(f"s{j}" for j in range(len(assignment)))
    values = TransformedMatrix(genes, samples, rng.normal(5.0, 1.0, size=(n_genes, len(assignment))),
                               TransformMethod.LOG_CPM)
    sets = GeneSetCollection.from_entries("toy", [
        (f"SET{s:02d}", "", [genes[(s * 7 + j) % n_genes] for j in range(12)]) for s in range(10)
    ])
    return values, ConditionLabels(samples, tuple(assignment)), sets


class TestHypergeometric(unittest.TestCase):
    """Test cases for hypergeometric and Wallenius tails"""

    def test_examples(self):
        self.assertAlmostEqual(hypergeom_tail(4, 10, 4, 5), 6 / 252, places=12)
        self.assertAlmostEqual(hypergeom_tail(3, 6, 3, 3), 0.05, places=12)
        self.assertEqual(hypergeom_tail(0, 10, 4, 5), 1.0)

    def test_matches_enumeration(self):
        for k, N, K, n in valid_contingencies(12):
            self.assertAlmostEqual(hypergeom_tail(k, N, K, n), enumerated_tail(k, N, K, n), delta=1e-12,
                                   msg=f"k={k} N={N} K={K} n={n}")

    def test_invalid_contingency(self):
        for args in [(5, 10, 4, 5), (0, 10, 11, 5), (0, 10, 4, 11), (-1, 10, 4, 5)]:
            with self.assertRaises(InvalidContingency):
                hypergeom_tail(*args)

    def test_wallenius_central_case(self):
        self.assertAlmostEqual(wallenius_tail(4, 10, 4, 5, 1.0), 6 / 252, delta=1e-6)
        for k, N, K, n in valid_contingencies(8):
            self.assertAlmostEqual(wallenius_tail(k, N, K, n, 1.0), hypergeom_tail(k, N, K, n), delta=1e-6,
                                   msg=f"k={k} N={N} K={K} n={n}")

    def test_wallenius_central_case_larger_population(self):
        for k, N, K, n in [(5, 30, 10, 8), (12, 30, 15, 15), (1, 30, 1, 29), (9, 30, 20, 10)]:
            self.assertAlmostEqual(wallenius_tail(k, N, K, n, 1.0), hypergeom_tail(k, N, K, n), delta=1e-6)

    def test_wallenius_higher_odds(self):
        for k, N, K, n in [(4, 10, 4, 5), (3, 12, 4, 5), (6, 20, 8, 8)]:
            self.assertGreater(wallenius_tail(k, N, K, n, 2.0), wallenius_tail(k, N, K, n, 1.0))

    def test_wallenius_matches_urn(self):
        rng = np.random.default_rng(31)
        for k, N, K, n, omega in [(3, 10, 4, 5, 2.0), (2, 12, 5, 4, 0.5), (4, 15, 6, 7, 3.0)]:
            self.assertAlmostEqual(wallenius_tail(k, N, K, n, omega), urn_tail(k, N, K, n, omega, 40000, rng),
                                   delta=0.015)

    def test_wallenius_rejects_nonpositive_odds(self):
        with self.assertRaises(NonpositiveOdds):
            wallenius_tail(2, 10, 4, 5, 0.0)


class TestOverRepresentation(unittest.TestCase):
    """Test cases for ORA and bias-weighted ORA"""

    def test_ora_example(self):
        genes, sets = ten_gene_sets()
        de = {"g01", "g02", "g03", "g04", "g05"}
        table = ora(de, sets, genes)
        self.assertAlmostEqual(table.get("S1").raw_p, 6 / 252, places=10)
        self.assertEqual(table.notes["universe_size"], "10")
        self.assertAlmostEqual(table.get("S1").statistic, 4 * 10 / (4 * 5))
        eased = ora(de, sets, genes, ease=True)
        self.assertAlmostEqual(eased.get("S1").raw_p, 66 / 252, places=10)
        self.assertGreaterEqual(eased.get("S2").raw_p, table.get("S2").raw_p)

    def test_ora_empty_de_list(self):
        genes, sets = ten_gene_sets()
        table = ora(set(), sets, genes)
        self.assertTrue(all(row.raw_p == 1.0 and row.relative_rank == 1.0 for row in table.rows))

    def test_ease_forced_overlap(self):
        genes = {f"g{i:02d}" for i in range(1, 11)}
        sets = GeneSetCollection.from_entries("toy", [("BIG", "", [f"g{i:02d}" for i in range(1, 9)])])
        de = {"g01", "g02", "g03", "g09", "g10"}
        # 5 draws from 10 genes must hit at least 3 of the 8 set genes
        eased = ora(de, sets, genes, UniverseChoice.ALL_TESTED_GENES, ease=True)
        self.assertEqual(eased.get("BIG").raw_p, 1.0)
        plain = ora(de, sets, genes, UniverseChoice.ALL_TESTED_GENES)
        self.assertEqual(plain.get("BIG").raw_p, 1.0)

    def test_ora_universe_choice(self):
        genes, sets = ten_gene_sets()
        genes = genes | {"x1", "x2"}
        de = {"g01", "g02"}
        self.assertEqual(ora(de, sets, genes, UniverseChoice.ANNOTATED_GENES).notes["universe_size"], "10")
        self.assertEqual(ora(de, sets, genes, UniverseChoice.ALL_TESTED_GENES).notes["universe_size"], "12")

    def test_ora_errors(self):
        sets = GeneSetCollection.from_entries("toy", [("S1", "", ["a", "b"])])
        with self.assertRaises(EmptyUniverse):
            ora(set(), sets, {"c", "d"})
        with self.assertRaises(EmptyTable):
            ora(set(), sets, {"c", "d"}, UniverseChoice.ALL_TESTED_GENES)
        with self.assertRaises(ValueError):
            ora({"z"}, sets, {"a", "b"})

    def test_pwf_fit(self):
        np.testing.assert_allclose(pwf_fit([0, 1, 0, 1], [1.0, 2.0, 3.0, 4.0]), [0.125, 0.5, 0.5, 0.875])
        np.testing.assert_allclose(pwf_fit([0, 0, 1, 1], [1.0, 2.0, 3.0, 4.0]), [0.125, 0.125, 0.875, 0.875])
        # returned in input order
        np.testing.assert_allclose(pwf_fit([1, 0, 1, 0], [4.0, 3.0, 2.0, 1.0]), [0.875, 0.5, 0.5, 0.125])
        with self.assertRaises(DegeneratePwf):
            pwf_fit([1, 1, 1], [1.0, 2.0, 3.0])

    def test_goseq_constant_bias_matches_ora(self):
        genes, sets = ten_gene_sets()
        de = {"g01", "g02", "g03", "g04", "g05"}
        tested = sorted(genes)
        table = goseq(de, tested, sets, {g: 1000.0 for g in tested})
        plain = ora(de, sets, genes)
        for name in ("S1", "S2"):
            self.assertAlmostEqual(table.get(name).statistic, 1.0)
            self.assertAlmostEqual(table.get(name).raw_p, plain.get(name).raw_p, delta=1e-6)

    def test_goseq_empty_de_list(self):
        genes, sets = ten_gene_sets()
        with self.assertRaises(DegeneratePwf):
            goseq(set(), sorted(genes), sets, {g: 1.0 for g in genes})

    def test_goseq_missing_bias(self):
        genes, sets = ten_gene_sets()
        bias = {g: 1.0 for g in genes if g != "g03"}
        with self.assertRaises(BiasUnavailable) as caught:
            goseq({"g01"}, sorted(genes), sets, bias, bias_name="transcript_length")
        self.assertIn("g03", str(caught.exception))

    def test_goseq_length_bias_lowers_odds_evidence(self):
        genes = [f"g{i:02d}" for i in range(1, 21)]
        lengths = {g: float(i) for i, g in enumerate(genes, start=1)}
        de = set(genes[12:])
        # long genes are DE; a set of long genes should look less surprising once length is accounted for
        sets = GeneSetCollection.from_entries("toy", [("LONG", "", genes[14:]), ("REST", "", genes[:14])])
        weighted = goseq(de, genes, sets, lengths)
        plain = ora(de, sets, set(genes))
        self.assertGreater(weighted.get("LONG").statistic, 1.0)
        self.assertGreater(weighted.get("LONG").raw_p, plain.get("LONG").raw_p)

    def test_goseq_resampling_close_to_wallenius(self):
        genes = [f"g{i:02d}" for i in range(1, 21)]
        de = set(genes[:10])
        sets = GeneSetCollection.from_entries("toy", [
            ("S1", "", ["g01", "g02", "g03", "g11", "g12"]),
            ("S2", "", [g for g in genes if g not in {"g01", "g02", "g03", "g11", "g12"}]),
        ])
        bias = {g: 5.0 for g in genes}
        wallenius = goseq(de, genes, sets, bias, method=GoseqMethod.WALLENIUS)
        resampled = goseq(de, genes, sets, bias, method=GoseqMethod.RESAMPLING, resamples=999, seed=7)
        self.assertAlmostEqual(wallenius.get("S1").raw_p, 0.5, places=5)
        self.assertAlmostEqual(resampled.get("S1").raw_p, wallenius.get("S1").raw_p, delta=0.05)
        again = goseq(de, genes, sets, bias, method=GoseqMethod.RESAMPLING, resamples=999, seed=7)
        self.assertEqual(again.get("S1").raw_p, resampled.get("S1").raw_p)


class TestGsea(unittest.TestCase):
    """Test cases for the weighted KS engines"""

    def test_enrichment_score_examples(self):
        ranked = RankedList(("a", "b", "c", "d"), np.array([4.0, 3.0, 2.0, 1.0]), RankingStat.DIFF_OF_CLASSES)
        self.assertAlmostEqual(enrichment_score(ranked, {"a", "c"}, 1.0), 2 / 3)
        self.assertAlmostEqual(enrichment_score(ranked, {"a"}, 0.0), 1.0)
        with self.assertRaises(NoComplement):
            enrichment_score(ranked, {"a", "b", "c", "d"}, 1.0)
        with self.assertRaises(EmptySetInList):
            enrichment_score(ranked, {"z"}, 1.0)

    def test_unweighted_matches_ks_oracle(self):
        rng = np.random.default_rng(3)
        genes = tuple(f"g{i:02d}" for i in range(50))
        ranked = RankedList(genes, np.sort(rng.normal(size=50))[::-1], RankingStat.T_STATISTIC)
        for _ in range(25):
            members = set(rng.choice(genes, size=int(rng.integers(1, 20)), replace=False))
            self.assertAlmostEqual(enrichment_score(ranked, members, 0.0), ks_oracle(genes, members), delta=1e-12)

    def test_es_bounds_and_reflection(self):
        rng = np.random.default_rng(5)
        genes = tuple(f"g{i:02d}" for i in range(30))
        statistic = np.sort(rng.normal(size=30))[::-1]
        ranked = RankedList(genes, statistic, RankingStat.T_STATISTIC)
        flipped = RankedList(genes[::-1], -statistic[::-1], RankingStat.T_STATISTIC)
        for exponent in (1.0, 1.5, 2.0):
            members = set(rng.choice(genes, size=8, replace=False))
            es = enrichment_score(ranked, members, exponent)
            self.assertLessEqual(abs(es), 1.0)
            self.assertAlmostEqual(enrichment_score(flipped, members, exponent), -es, places=12)

    def test_es_config_validation(self):
        with self.assertRaises(ValueError):
            EsConfig(exponent=3.0)
        with self.assertRaises(ValueError):
            EsConfig(permutations=0)

    def test_degenerate_significance(self):
        nes, raw_p, q, degenerate = _gsea_significance(np.array([0.0, 0.5]), np.array([[0.1, -0.2], [0.2, 0.4]]))
        self.assertEqual((nes[0], raw_p[0], q[0]), (0.0, 1.0, 1.0))
        self.assertAlmostEqual(nes[1], 0.5 / 0.3)
        self.assertAlmostEqual(raw_p[1], 1.0 / 3.0)
        self.assertEqual(degenerate, 1)

    def test_q_value_tail_ratio(self):
        null = np.array([[0.2, 0.4], [0.1, 0.5]])
        nes, raw_p, q, degenerate = _gsea_significance(np.array([0.6, 0.3]), null)
        np.testing.assert_allclose(nes, [2.0, 1.0])
        np.testing.assert_allclose(raw_p, [1 / 3, 2 / 3])
        # pooled null NES: 2/3, 4/3, 1/3, 5/3; none reach 2, half reach 1
        np.testing.assert_allclose(q, [0.0, 0.5])
        self.assertEqual(degenerate, 0)

    def test_q_value_negative_side(self):
        null = np.array([[-0.2, -0.4], [-0.1, -0.5]])
        nes, raw_p, q, _ = _gsea_significance(np.array([-0.6, -0.3]), null)
        np.testing.assert_allclose(nes, [-2.0, -1.0])
        np.testing.assert_allclose(q, [0.0, 0.5])

    def test_preranked_table(self):
        rng = np.random.default_rng(9)
        values, labels, sets = toy_expression(rng)
        genes = values.gene_ids
        ranked = RankedList(genes, np.sort(rng.normal(size=len(genes)))[::-1], RankingStat.DE_DERIVED)
        cfg = EsConfig(exponent=1.0, permutations=60)
        table = gsea_preranked(ranked, sets, cfg, seed=11)
        self.assertEqual(len(table), 10)
        self.assertEqual(table.threshold, 0.25)
        for row in table.rows:
            self.assertTrue(0 < row.raw_p <= 1 and 0 <= row.adjusted <= 1)
        again = gsea_preranked(ranked, sets, cfg, seed=11)
        self.assertTrue(table.to_frame().equals(again.to_frame()))

    def test_preranked_filters_small_sets(self):
        ranked = RankedList(("a", "b", "c"), np.array([3.0, 2.0, 1.0]), RankingStat.DE_DERIVED)
        sets = GeneSetCollection.from_entries("toy", [("S1", "", ["a"])])
        with self.assertRaises(EmptyCollectionAfterFilter):
            gsea_preranked(ranked, sets, EsConfig(permutations=10), min_size=5)

    def test_phenotype_table(self):
        rng = np.random.default_rng(13)
        values, labels, sets = toy_expression(rng)
        table = gsea_phenotype(values, labels, sets, RankingStat.SIGNAL_TO_NOISE, EsConfig(permutations=40), seed=3)
        self.assertEqual(table.engine, EngineTag.GSEA_PHENOTYPE)
        self.assertEqual(table.notes["statistic"], "signal_to_noise")
        self.assertTrue(all(0 <= row.adjusted <= 1 for row in table.rows))

    def test_phenotype_needs_replicates(self):
        rng = np.random.default_rng(13)
        values, labels, sets = toy_expression(rng, assignment="ABBBBBBB")
        with self.assertRaises(DegenerateDesign):
            gsea_phenotype(values, labels, sets, RankingStat.T_STATISTIC, EsConfig(permutations=5))


class TestPadogAndRanks(unittest.TestCase):
    """Test cases for PADOG scoring and rank assembly"""

    def test_padog_weights(self):
        np.testing.assert_allclose(padog_weights([1, 3]), [2.0, 1.0])
        np.testing.assert_allclose(padog_weights([2, 2, 2]), [1.0, 1.0, 1.0])

    def test_padog_table(self):
        rng = np.random.default_rng(17)
        values, labels, sets = toy_expression(rng)
        table = padog(values, labels, sets, permutations=50, seed=2)
        self.assertEqual(len(table), 10)
        for row in table.rows:
            self.assertTrue(0 < row.raw_p <= 1)
            self.assertGreaterEqual(row.raw_p, 1 / 51)
        self.assertEqual(padog(values, labels, sets, permutations=50, seed=2).to_frame().values.tolist(),
                         table.to_frame().values.tolist())

    def test_padog_needs_replicates(self):
        rng = np.random.default_rng(17)
        values, labels, sets = toy_expression(rng, assignment="ABBBBBBB")
        with self.assertRaises(DegenerateDesign):
            padog(values, labels, sets, permutations=5)

    def test_assemble_ranks_example(self):
        table = assemble_ranks(table_with([0.01, 0.5, 0.5, 1.0, 1.0]))
        self.assertEqual([r.dense_rank for r in table.rows], [1, 2, 2, 3, 3])
        np.testing.assert_allclose([r.relative_rank for r in table.rows], [1 / 3, 2 / 3, 2 / 3, 1.0, 1.0])
        self.assertEqual([r.significant for r in table.rows], [True, False, False, False, False])

    def test_assemble_ranks_trivial(self):
        self.assertEqual([r.relative_rank for r in assemble_ranks(table_with([1.0, 1.0])).rows], [1.0, 1.0])
        self.assertEqual(assemble_ranks(table_with([0.2])).rows[0].relative_rank, 1.0)
        with self.assertRaises(EmptyTable):
            assemble_ranks(table_with([]))

    def test_assemble_ranks_properties(self):
        rng = np.random.default_rng(21)
        for _ in range(1000):
            adjusted = np.round(rng.random(int(rng.integers(1, 15))), 1)
            adjusted[rng.random(adjusted.size) < 0.2] = 1.0
            rows = assemble_ranks(table_with(list(adjusted))).rows
            for a, b in zip(rows, rows[1:]):
                if a.adjusted <= b.adjusted:
                    self.assertLessEqual(a.relative_rank, b.relative_rank)
            for row in rows:
                if row.adjusted == 1.0:
                    self.assertEqual(row.relative_rank, 1.0)


if __name__ == "__main__":
    unittest.main()

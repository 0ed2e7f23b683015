import os
import random
import tempfile
import unittest

import numpy as np

from gsaudit.models.corpus import CountMatrix
from gsaudit.services.corpus import (
    attach_lengths, parse_count_matrix, parse_gene_sets, parse_id_map, parse_labels, parse_lengths,
)
from gsaudit.utils.exceptions import (
    DuplicateGeneId, DuplicateSetName, DuplicateSource, EmptyGroup, MalformedCell, MalformedLine,
    MissingLabel, RaggedRow, TooManyConditions,
)


class TestCorpus(unittest.TestCase):
    """Test cases for input parsing"""

    def setUp(self):
        """Set up a scratch directory for fixture files"""
        self._tmp = tempfile.TemporaryDirectory()
        self.dir = self._tmp.name

    def tearDown(self):
        self._tmp.cleanup()

    def write(self, name, text):
        path = os.path.join(self.dir, name)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        return path

    def four_sample_matrix(self):
        return parse_count_matrix(self.write("counts.tsv", "gene_id\ts1\ts2\ts3\ts4\ng1\t1\t2\t3\t4\n"))

    def test_count_matrix(self):
        """Cells are transcribed in file order"""
        matrix = parse_count_matrix(self.write("counts.tsv", "gene_id\ts1\ts2\ng1\t1\t2\ng2\t3\t4\n"))
        self.assertEqual(matrix.gene_ids, ("g1", "g2"))
        self.assertEqual(matrix.samples, ("s1", "s2"))
        np.testing.assert_array_equal(matrix.counts, [[1, 2], [3, 4]])
        self.assertIsNone(matrix.lengths)

    def test_count_matrix_length_column(self):
        matrix = parse_count_matrix(self.write("counts.tsv", "gene_id\ts1\ts2\tlength\ng1\t1\t2\t1500\n"))
        self.assertEqual(matrix.samples, ("s1", "s2"))
        np.testing.assert_array_equal(matrix.lengths, [1500])

    def test_count_matrix_errors(self):
        with self.assertRaises(DuplicateGeneId):
            parse_count_matrix(self.write("dup.tsv", "gene_id\ts1\ng1\t1\ng1\t2\n"))
        with self.assertRaises(MalformedCell) as ctx:
            parse_count_matrix(self.write("neg.tsv", "gene_id\ts1\ts2\ng1\t1\t-1\n"))
        self.assertEqual((ctx.exception.row, ctx.exception.col), (2, 3))
        with self.assertRaises(MalformedCell):
            parse_count_matrix(self.write("float.tsv", "gene_id\ts1\ng1\t1.5\n"))
        with self.assertRaises(RaggedRow) as ctx:
            parse_count_matrix(self.write("ragged.tsv", "gene_id\ts1\ts2\ng1\t1\t2\ng2\t3\n"))
        self.assertEqual(ctx.exception.row, 3)

    def test_round_trip(self):
        """Serialising and re-parsing yields an identical value"""
        rng = np.random.default_rng(3)
        matrix = CountMatrix(("a", "b", "c"), ("x", "y"), rng.integers(0, 1000, (3, 2)), np.array([10, 20, 30]))
        path = os.path.join(self.dir, "rt.tsv")
        matrix.write_tsv(path)
        self.assertEqual(parse_count_matrix(path), matrix)

    def test_labels(self):
        matrix = self.four_sample_matrix()
        labels = parse_labels(self.write("labels.tsv", "s1\tA\ns2\tA\ns3\tB\ns4\tB\n"), matrix)
        self.assertEqual(labels.group_sizes, (2, 2))
        with self.assertRaises(TooManyConditions):
            parse_labels(self.write("three.tsv", "s1\tA\ns2\tB\ns3\tC\ns4\tC\n"), matrix)
        with self.assertRaises(EmptyGroup):
            parse_labels(self.write("one.tsv", "s1\tA\ns2\tA\ns3\tA\ns4\tA\n"), matrix)
        with self.assertRaises(MissingLabel):
            parse_labels(self.write("missing.tsv", "s1\tA\ns2\tA\ns3\tB\n"), matrix)

    def test_labels_row_order(self):
        """Shuffling file rows never changes the result"""
        matrix = self.four_sample_matrix()
        rows = ["s1\tA", "s2\tB", "s3\tA", "s4\tB"]
        expected = parse_labels(self.write("l0.tsv", "\n".join(rows) + "\n"), matrix)
        shuffler = random.Random(11)
        for i in range(5):
            shuffler.shuffle(rows)
            self.assertEqual(parse_labels(self.write(f"l{i + 1}.tsv", "\n".join(rows) + "\n"), matrix), expected)

    def test_gene_sets(self):
        collection = parse_gene_sets(self.write("sets.tsv", "S1\tdesc\tg1\tg2\nS2\tother\tg1\tg1\n"))
        self.assertEqual(collection.name, "sets")
        self.assertEqual(collection.sets["S1"], frozenset({"g1", "g2"}))
        self.assertEqual(collection.sets["S2"], frozenset({"g1"}))
        self.assertEqual(collection.descriptions["S2"], "other")
        with self.assertRaises(DuplicateSetName):
            parse_gene_sets(self.write("dup.tsv", "S1\td\tg1\nS1\td\tg2\n"))
        with self.assertRaises(MalformedLine) as ctx:
            parse_gene_sets(self.write("short.tsv", "S1\td\tg1\nS2\td\n"))
        self.assertEqual(ctx.exception.line, 2)

    def test_id_map(self):
        id_map = parse_id_map(self.write("map.tsv", "a\tX\nb\tX\nc\tY\n"))
        self.assertEqual(id_map.duplicated_targets, ["X"])
        self.assertEqual(id_map.order["b"], 1)
        with self.assertRaises(DuplicateSource):
            parse_id_map(self.write("bad.tsv", "a\tX\na\tY\n"))
        self.assertEqual(len(parse_id_map(self.write("empty.tsv", ""))), 0)

    def test_lengths_file(self):
        matrix = self.four_sample_matrix()
        with_lengths = attach_lengths(matrix, parse_lengths(self.write("len.tsv", "g1\t900\n")))
        np.testing.assert_array_equal(with_lengths.lengths, [900])
        self.assertIsNone(attach_lengths(matrix, {"other": 5}).lengths)


if __name__ == "__main__":
    unittest.main()

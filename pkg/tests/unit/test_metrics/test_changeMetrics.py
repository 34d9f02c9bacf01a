#    Copyright (C) 2026 The UniChange Development Team. See the AUTHORS.md file for a full list of copyright holders.
#
#    This file is part of UniChange.
#
#    UniChange is free software: you can redistribute it and/or modify
#    it under the terms of the GNU General Public License as published by
#    the Free Software Foundation, either version 3 of the License, or
#    (at your option) any later version.
#
#    UniChange is distributed in the hope that it will be useful,
#    but WITHOUT ANY WARRANTY; without even the implied warranty of
#    MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
#    GNU General Public License for more details.
#
#    You should have received a copy of the GNU General Public License
#    along with UniChange.  If not, see <http://www.gnu.org/licenses/>.

import unittest
import os
import sys
import errno
import json
import math

import numpy as np

def bruteConfusion(predT1, predT2, gtT1, gtT2, numClasses):
    matrix = [[0] * (numClasses + 1) for _ in range(numClasses + 1)]
    for pred, gt in ((predT1, gtT1), (predT2, gtT2)):
        for p, g in zip(pred.ravel().tolist(), gt.ravel().tolist()):
            matrix[p][g] += 1
    return matrix

def bruteBinary(pred, gt):
    tp = fp = fn = 0
    for p, g in zip(pred.ravel().tolist(), gt.ravel().tolist()):
        tp += p and g
        fp += p and not g
        fn += g and not p
    if tp + fp + fn == 0:
        return 1.0, 1.0, 1.0, 1.0
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1, tp / (tp + fp + fn)

class TestChangeMetrics(unittest.TestCase):
    '''Tests of the binary and semantic change detection metrics.'''
    def setUp(self):
        '''Method setting-up test fixture.

        Locates the project root and imports unichange, falling back to the
        source tree when the package is not installed.
        '''
        self.output_files = []
        self.this_path = os.path.dirname(os.path.realpath(__file__))
        self.project_test_type_path = os.path.split(self.this_path)[0]
        self.project_tests_path = os.path.split(self.project_test_type_path)[0]
        self.project_root_path = os.path.split(self.project_tests_path)[0]
        try:
            import unichange
        except ImportError:
            sys.path.insert(0, self.project_root_path)
            import unichange
        unichange.LOG.setLevel('WARNING')
        self.unichange = unichange

    def remove_file(self, filename):
        '''Remove files, without failing for files that do not exist.'''
        try:
            os.remove(filename)
        except OSError as error:
            if error.errno != errno.ENOENT:
                raise

    def tearDown(self):
        for filename in self.output_files:
            self.remove_file(filename)

    def fixture(self):
        return self.unichange.metrics.ScdConfusion(np.array([[10, 1, 0], [2, 5, 1], [0, 1, 6]], dtype=np.int64))

    def test_semantic_fixture(self):
        metrics = self.unichange.metrics
        confusion = self.fixture()
        unchanged, changed, mean = metrics.miou(confusion)
        self.assertAlmostEqual(unchanged, 10.0 / 13.0, places=12)
        self.assertAlmostEqual(changed, 13.0 / 16.0, places=12)
        self.assertAlmostEqual(mean, 0.79087, places=5)
        self.assertAlmostEqual(metrics.sek(confusion), math.exp(13.0 / 16.0 - 1.0) * 69.0 / 149.0, places=12)
        self.assertAlmostEqual(metrics.sek(confusion), 0.383913, places=6)
        precision, recall, f1 = metrics.fScd(confusion)
        self.assertAlmostEqual(precision, 11.0 / 15.0, places=12)
        self.assertAlmostEqual(recall, 11.0 / 14.0, places=12)
        self.assertAlmostEqual(f1, 22.0 / 29.0, places=12)
        self.assertEqual(confusion.numClasses, 2)

    def test_binary_metrics(self):
        metrics = self.unichange.metrics
        counts = metrics.binaryCounts(np.array([[1, 1], [0, 0]]), np.array([[1, 0], [0, 0]]))
        self.assertEqual(counts, metrics.BinaryCounts(1, 1, 0, 2))
        precision, recall, f1, iou = metrics.bcdMetrics(counts)
        self.assertAlmostEqual(precision, 0.5)
        self.assertAlmostEqual(recall, 1.0)
        self.assertAlmostEqual(f1, 2.0 / 3.0)
        self.assertAlmostEqual(iou, 0.5)
        self.assertEqual(metrics.bcdMetrics(metrics.BinaryCounts(0, 0, 0, 16)), (1.0, 1.0, 1.0, 1.0))
        self.assertEqual(metrics.bcdMetrics(metrics.BinaryCounts(0, 3, 0, 13))[3], 0.0)
        with self.assertRaises(self.unichange.BadArguments):
            metrics.binaryCounts(np.zeros((2, 2)), np.zeros((2, 3)))

    def test_empty_semantic_matrix(self):
        metrics = self.unichange.metrics
        confusion = metrics.ScdConfusion(np.zeros((3, 3), dtype=np.int64))
        self.assertEqual(metrics.sek(confusion), 0.0)
        self.assertEqual(metrics.fScd(confusion), (0.0, 0.0, 0.0))
        only = metrics.ScdConfusion(np.array([[5, 0], [0, 0]], dtype=np.int64))
        self.assertEqual(metrics.miou(only)[0], 1.0)
        self.assertEqual(metrics.sek(only), 0.0)

    def test_out_of_range_labels(self):
        metrics = self.unichange.metrics
        labels = np.zeros((2, 2), dtype=np.int64)
        wrong = labels.copy()
        wrong[0, 0] = 3
        with self.assertRaises(self.unichange.BadArguments):
            metrics.scdConfusion(labels, labels, labels, wrong, 2)
        with self.assertRaises(self.unichange.BadArguments):
            metrics.scdConfusion(labels, labels, labels, np.zeros((3, 3), dtype=np.int64), 2)

    def test_binary_against_brute_force(self):
        metrics = self.unichange.metrics
        rng = np.random.default_rng(11)
        for _ in range(1000):
            rate = rng.uniform(0.0, 0.6)
            pred = (rng.random((8, 8)) < rate).astype(np.uint8)
            gt = (rng.random((8, 8)) < rate).astype(np.uint8)
            expected = bruteBinary(pred, gt)
            observed = metrics.bcdMetrics(metrics.binaryCounts(pred, gt))
            for left, right in zip(observed, expected):
                self.assertAlmostEqual(left, right, places=12)

    def test_semantic_against_brute_force(self):
        metrics = self.unichange.metrics
        rng = np.random.default_rng(12)
        for _ in range(500):
            maps = [rng.integers(0, 4, size=(8, 8)) for _ in range(4)]
            confusion = metrics.scdConfusion(maps[0], maps[1], maps[2], maps[3], 3)
            self.assertEqual(confusion.matrix.tolist(), bruteConfusion(maps[0], maps[1], maps[2], maps[3], 3))

    def test_accumulator(self):
        metrics = self.unichange.metrics
        rng = np.random.default_rng(13)
        accumulator = metrics.ChangeMetricAccumulator(2)
        total = metrics.ScdConfusion(np.zeros((3, 3), dtype=np.int64))
        for _ in range(5):
            change = rng.integers(0, 2, size=(6, 6))
            gtChange = rng.integers(0, 2, size=(6, 6))
            labels = [rng.integers(1, 3, size=(6, 6)) for _ in range(4)]
            accumulator.addSemantic(change, gtChange, labels[0], labels[1], labels[2], labels[3])
            total = total + metrics.scdConfusion(labels[0] * change, labels[1] * change, labels[2] * gtChange,
                                                 labels[3] * gtChange, 2)
        self.assertEqual(accumulator.confusion.matrix.tolist(), total.matrix.tolist())
        report = accumulator.report()
        self.assertEqual(set(report), set(metrics.REPORT_KEYS))
        self.assertEqual(report['IoU'], report['IoU_c'])
        self.assertEqual(accumulator.samples, 5)
        binary = metrics.ChangeMetricAccumulator()
        binary.addBinary(np.ones((2, 2)), np.ones((2, 2)))
        report = binary.report()
        self.assertEqual(report['F1'], 1.0)
        self.assertIsNone(report['SeK'])
        with self.assertRaises(self.unichange.BadArguments):
            binary.addSemantic(np.ones((2, 2)), np.ones((2, 2)), np.ones((2, 2)), np.ones((2, 2)),
                               np.ones((2, 2)), np.ones((2, 2)))

    def test_report_files(self):
        metrics = self.unichange.metrics
        accumulator = metrics.ChangeMetricAccumulator()
        accumulator.addBinary(np.array([1, 0]), np.array([1, 1]))
        report = accumulator.report()
        text = metrics.formatReport(report)
        self.assertEqual(len(text.splitlines()), 2)
        self.assertIn('0.50000', text)
        self.assertIn('-', text.splitlines()[1])
        path = os.path.join(self.this_path, 'report.json')
        self.output_files.append(path)
        metrics.writeReport(report, path)
        with open(path) as reportFile:
            self.assertEqual(json.load(reportFile), report)

suite = unittest.TestLoader().loadTestsFromTestCase(TestChangeMetrics)

if __name__ == '__main__':
    unittest.main()

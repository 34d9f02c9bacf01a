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
import math

import torch

class TestChangeLosses(unittest.TestCase):
    '''Tests of the mask loss terms, their weighting and the gating of binary batches.'''
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

    def test_bce(self):
        losses = self.unichange.losses
        value = losses.bceLoss(torch.zeros(2, 4, 4), torch.randint(0, 2, (2, 4, 4)))
        self.assertAlmostEqual(float(value), math.log(2.0), places=6)
        with self.assertRaises(self.unichange.BadArguments):
            losses.bceLoss(torch.zeros(4, 4), torch.zeros(4, 5))

    def test_dice(self):
        losses = self.unichange.losses
        full = losses.diceLoss(torch.full((4, 4), 60.0, dtype=torch.float64), torch.zeros(4, 4))
        self.assertAlmostEqual(float(full), 16.0 / 17.0, places=12)
        half = losses.diceLoss(torch.zeros(2, 2, dtype=torch.float64), torch.zeros(2, 2))
        self.assertAlmostEqual(float(half), 2.0 / 3.0, places=12)
        # Per-sample values averaged over the batch.
        batch = losses.diceLoss(torch.stack([torch.full((4, 4), 60.0, dtype=torch.float64),
                                             torch.full((4, 4), -60.0, dtype=torch.float64)]), torch.zeros(2, 4, 4))
        self.assertAlmostEqual(float(batch), (16.0 / 17.0) / 2.0, places=12)

    def test_semantic_segmentation(self):
        losses = self.unichange.losses
        logits = torch.zeros(4, 3, 3)
        labels = torch.randint(0, 4, (3, 3))
        self.assertAlmostEqual(float(losses.ssLoss(logits, logits, labels, labels)), math.log(4.0), places=6)
        self.assertAlmostEqual(float(losses.ssLoss(logits, logits, labels, labels + 7, 't1')), math.log(4.0), places=6)
        self.assertEqual(float(losses.ssLoss(logits, logits, labels, labels, 'none')), 0.0)
        with self.assertRaises(self.unichange.BadArguments):
            losses.ssLoss(logits, logits, labels, torch.full((3, 3), 4))
        with self.assertRaises(self.unichange.BadArguments):
            losses.ssLoss(logits, logits, labels, labels, 'neither')

    def test_semantic_consistency(self):
        losses = self.unichange.losses
        stream = torch.zeros(2, 1, 1, dtype=torch.float64)
        stream[0] = 1.0
        opposite = -stream
        orthogonal = torch.zeros(2, 1, 1, dtype=torch.float64)
        orthogonal[1] = 1.0
        unchanged = torch.zeros(4, 4)
        changed = torch.ones(4, 4)
        self.assertAlmostEqual(float(losses.scLoss(stream, stream, unchanged)), 0.0, places=12)
        self.assertAlmostEqual(float(losses.scLoss(stream, opposite, changed)), 0.0, places=12)
        self.assertAlmostEqual(float(losses.scLoss(stream, orthogonal, unchanged)), 1.0, places=12)
        self.assertAlmostEqual(float(losses.scLoss(stream, stream, changed)), 1.0, places=12)

    def test_loss_weights(self):
        losses = self.unichange.losses
        weights = losses.LossWeights()
        self.assertEqual((weights.bce, weights.dice, weights.ss, weights.sc), (2.0, 0.5, 0.5, 1.0))
        self.assertEqual(losses.LossWeights.fromDict({'sc': 0.0}).sc, 0.0)
        with self.assertRaises(self.unichange.BadArguments):
            losses.LossWeights(bce=-1.0)
        with self.assertRaises(self.unichange.BadArguments):
            losses.LossWeights.fromDict({'focal': 1.0})

    def test_binary_batches_are_gated(self):
        losses = self.unichange.losses
        data = self.unichange.data
        decoder = self.unichange.decoder
        logits = torch.randn(2, 8, 8, requires_grad=True)
        gt = data.GroundTruth(torch.randint(0, 2, (2, 8, 8)).float())
        streams = decoder.FusedStreams(torch.randn(2, 4, 2, 2))
        fragment = losses.maskLoss(data.MaskBundle(logits), gt, streams, losses.LossWeights(), False)
        self.assertTrue(fragment.gated)
        self.assertEqual(float(fragment.ss), 0.0)
        self.assertEqual(float(fragment.sc), 0.0)
        self.assertAlmostEqual(float(fragment.weighted), float(2.0 * fragment.bce + 0.5 * fragment.dice), places=6)
        report = losses.totalLoss(torch.tensor(0.25), fragment)
        self.assertAlmostEqual(float(report.total), 0.25 + float(fragment.weighted), places=6)
        self.assertEqual(set(report.asFloats()), {'total', 'txt', 'bce', 'dice', 'ss', 'sc', 'gated'})
        with self.assertRaises(self.unichange.BadArguments):
            losses.maskLoss(data.MaskBundle(logits), gt, streams, losses.LossWeights(), True)

    def test_semantic_batch(self):
        losses = self.unichange.losses
        data = self.unichange.data
        decoder = self.unichange.decoder
        sem1 = torch.randint(0, 3, (1, 8, 8))
        sem2 = torch.randint(0, 3, (1, 8, 8))
        gt = data.GroundTruth((sem1 != sem2).float(), sem1, sem2)
        bundle = data.MaskBundle(torch.randn(1, 8, 8), torch.randn(1, 3, 8, 8), torch.randn(1, 3, 8, 8))
        streams = decoder.FusedStreams(torch.randn(1, 4, 2, 2), torch.randn(1, 4, 2, 2), torch.randn(1, 4, 2, 2))
        weights = losses.LossWeights()
        fragment = losses.maskLoss(bundle, gt, streams, weights, True)
        self.assertFalse(fragment.gated)
        expected = 2.0 * fragment.bce + 0.5 * fragment.dice + 0.5 * fragment.ss + 1.0 * fragment.sc
        self.assertAlmostEqual(float(fragment.weighted), float(expected), places=6)

    def test_saturated_predictions(self):
        losses = self.unichange.losses
        generator = torch.Generator().manual_seed(3)
        gt = torch.randint(0, 2, (2, 8, 8), generator=generator)
        gt[:, 0, 0] = 1
        logits = (gt.double() * 2.0 - 1.0) * 60.0
        self.assertLess(float(losses.bceLoss(logits, gt)), 1e-8)
        self.assertLessEqual(float(losses.diceLoss(logits, gt)), 1e-6)
        labels = torch.randint(0, 4, (2, 8, 8), generator=generator)
        semantic = torch.nn.functional.one_hot(labels, 4).permute(0, 3, 1, 2).double() * 60.0
        self.assertLess(float(losses.ssLoss(semantic, semantic, labels, labels)), 1e-8)

    def test_zero_weights(self):
        losses = self.unichange.losses
        data = self.unichange.data
        decoder = self.unichange.decoder
        sem1 = torch.randint(0, 3, (1, 8, 8))
        sem2 = torch.randint(0, 3, (1, 8, 8))
        gt = data.GroundTruth((sem1 != sem2).float(), sem1, sem2)
        bundle = data.MaskBundle(torch.randn(1, 8, 8), torch.randn(1, 3, 8, 8), torch.randn(1, 3, 8, 8))
        streams = decoder.FusedStreams(torch.randn(1, 4, 2, 2), torch.randn(1, 4, 2, 2), torch.randn(1, 4, 2, 2))
        weights = losses.LossWeights(bce=0.0, dice=0.0, ss=0.0, sc=0.0)
        fragment = losses.maskLoss(bundle, gt, streams, weights, True)
        self.assertEqual(float(fragment.weighted), 0.0)
        self.assertGreater(float(fragment.bce), 0.0)
        self.assertEqual(float(losses.totalLoss(torch.zeros(()), fragment).total), 0.0)

    def test_pixel_permutation(self):
        losses = self.unichange.losses
        generator = torch.Generator().manual_seed(11)
        order = torch.randperm(64, generator=generator)
        def shuffle(tensor):
            return tensor.flatten(-2)[..., order].reshape(tensor.shape)
        logits = torch.randn(2, 8, 8, generator=generator, dtype=torch.float64)
        gt = torch.randint(0, 2, (2, 8, 8), generator=generator)
        self.assertAlmostEqual(float(losses.bceLoss(shuffle(logits), shuffle(gt))),
                               float(losses.bceLoss(logits, gt)), places=12)
        self.assertAlmostEqual(float(losses.diceLoss(shuffle(logits), shuffle(gt))),
                               float(losses.diceLoss(logits, gt)), places=12)
        t1 = torch.randn(2, 3, 8, 8, generator=generator, dtype=torch.float64)
        t2 = torch.randn(2, 3, 8, 8, generator=generator, dtype=torch.float64)
        sem1 = torch.randint(0, 3, (2, 8, 8), generator=generator)
        sem2 = torch.randint(0, 3, (2, 8, 8), generator=generator)
        self.assertAlmostEqual(float(losses.ssLoss(shuffle(t1), shuffle(t2), shuffle(sem1), shuffle(sem2))),
                               float(losses.ssLoss(t1, t2, sem1, sem2)), places=12)
        # Streams and change mask on the same grid, so the nearest-neighbour resampling is the identity.
        s1 = torch.randn(2, 5, 8, 8, generator=generator, dtype=torch.float64)
        s2 = torch.randn(2, 5, 8, 8, generator=generator, dtype=torch.float64)
        self.assertAlmostEqual(float(losses.scLoss(shuffle(s1), shuffle(s2), shuffle(gt))),
                               float(losses.scLoss(s1, s2, gt)), places=12)

    def test_gradients(self):
        losses = self.unichange.losses
        lib = self.unichange.lib
        generator = torch.Generator().manual_seed(7)
        logits = torch.randn(2, 6, 6, generator=generator, dtype=torch.float64, requires_grad=True)
        gt = torch.randint(0, 2, (2, 6, 6), generator=generator)
        self.assertLess(lib.checkGradients(lambda: losses.bceLoss(logits, gt), [logits]), 1e-4)
        self.assertLess(lib.checkGradients(lambda: losses.diceLoss(logits, gt), [logits]), 1e-4)
        self.assertTrue(lib.gradcheckInputs(lambda value: losses.diceLoss(value, gt), [logits]))
        t1 = torch.randn(2, 3, 4, 4, generator=generator, dtype=torch.float64, requires_grad=True)
        t2 = torch.randn(2, 3, 4, 4, generator=generator, dtype=torch.float64, requires_grad=True)
        sem1 = torch.randint(0, 3, (2, 4, 4), generator=generator)
        sem2 = torch.randint(0, 3, (2, 4, 4), generator=generator)
        self.assertLess(lib.checkGradients(lambda: losses.ssLoss(t1, t2, sem1, sem2), [t1, t2]), 1e-4)
        s1 = torch.randn(2, 5, 3, 3, generator=generator, dtype=torch.float64, requires_grad=True)
        s2 = torch.randn(2, 5, 3, 3, generator=generator, dtype=torch.float64, requires_grad=True)
        change = torch.randint(0, 2, (2, 12, 12), generator=generator)
        self.assertLess(lib.checkGradients(lambda: losses.scLoss(s1, s2, change), [s1, s2]), 1e-4)

suite = unittest.TestLoader().loadTestsFromTestCase(TestChangeLosses)

if __name__ == '__main__':
    unittest.main()

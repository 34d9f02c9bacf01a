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

import torch

class TestGradientSuite(unittest.TestCase):
    '''Central-difference check of the full semantic forward pass in float64.

    Covers the class bank, the t1 fusion and the stride-8 pyramid branch, so a
    gradient error anywhere between the encoder and the semantic losses shows.
    '''

    def setUp(self):
        '''Method setting-up test fixture.'''
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

    def test_gradientSuite(self):
        unichange = self.unichange
        torch.manual_seed(0)
        vocabulary = unichange.text.TokenVocabulary(('square', 'circle'))
        model = unichange.harness.UniChangeModel(vocabulary, width=16, lmWidth=16, heads=2, lmLayers=1)
        model = model.to(torch.float64)
        spec = unichange.datagen.SyntheticSpec(source_id='scenes', task='scd', image_size=32,
                                               conflict_map={'square': True, 'circle': True}, change_rate=0.15,
                                               seed=4, count=2)
        samples = unichange.datagen.generateSource(spec)
        images1, images2, gt = unichange.harness.collateSamples(samples, torch.float64)
        query = unichange.text.makeTaskQuery('scd', samples[0].vocabulary)
        weights = unichange.losses.LossWeights()
        parameters = [model.decoder.classBank[0].weight, model.decoder.fuseT1[0].weight,
                      model.encoder.pyramid.up8.weight]
        def objective():
            output = model(images1, images2, query)
            fragment = unichange.losses.maskLoss(output.bundle, gt, output.streams, weights, True)
            return output.txtLoss + fragment.weighted
        self.assertLess(unichange.lib.checkGradients(objective, parameters, maxEntries=16), 1e-4)

suite = unittest.TestLoader().loadTestsFromTestCase(TestGradientSuite)

if __name__ == '__main__':
    unittest.main()

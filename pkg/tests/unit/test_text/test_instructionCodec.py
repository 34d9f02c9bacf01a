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

class TestInstructionCodec(unittest.TestCase):
    '''Tests of instruction rendering, the token vocabulary and task-embedding extraction.'''
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

    def vocabularies(self):
        data = self.unichange.data
        return data.ClassVocabulary(('building',)), data.ClassVocabulary(('water', 'low vegetation'))

    def test_tokenize(self):
        text = self.unichange.text
        self.assertEqual(text.tokenize("The change mask is [CHANGE]."),
                         ['the', 'change', 'mask', 'is', '[CHANGE]', '.'])

    def test_render_instruction(self):
        text = self.unichange.text
        data = self.unichange.data
        building, semantic = self.vocabularies()
        generic = text.makeTaskQuery('bcd', data.ClassVocabulary.generic())
        self.assertEqual(generic.instruction, "please segment all areas that have undergone change.")
        named = text.makeTaskQuery('bcd', building)
        self.assertEqual(text.renderInstruction(named),
                         "please segment all areas that have undergone change. classes: building.")
        scd = text.makeTaskQuery('scd', semantic)
        self.assertEqual(scd.instruction,
                         "please segment the semantic masks of the changed areas. classes: water, low vegetation.")
        self.assertEqual(text.renderTargetResponse(generic), ['the', 'change', 'mask', 'is', '[CHANGE]', '.'])
        self.assertEqual(text.renderTargetResponse(scd).count('[T1]'), 1)
        self.assertEqual(text.renderTargetResponse(scd).count('[T2]'), 1)
        self.assertEqual(text.renderTargetResponse(scd).count('[CHANGE]'), 1)

    def test_token_vocabulary(self):
        text = self.unichange.text
        vocabulary = text.TokenVocabulary(('water', 'low vegetation'))
        self.assertEqual(vocabulary.tokens[:7], list(text.SPECIAL_TOKENS))
        self.assertEqual(vocabulary.padId, 0)
        self.assertTrue(vocabulary.covers("the semantic masks are [T1] [T2] and the change mask is [CHANGE]."))
        self.assertTrue(vocabulary.covers("classes: low vegetation."))
        self.assertFalse(vocabulary.covers("classes: playground."))
        self.assertEqual(vocabulary.encode("playground"), [vocabulary.unkId])
        sentence = "please segment all areas that have undergone change."
        self.assertEqual(vocabulary.decode(vocabulary.encode(sentence)), sentence)
        self.assertEqual(text.TokenVocabulary.fromJson(vocabulary.toJson()), vocabulary)

    def test_multi_class_instruction_is_covered(self):
        text = self.unichange.text
        _, semantic = self.vocabularies()
        vocabulary = text.TokenVocabulary(semantic.names)
        instruction = text.renderInstruction(text.makeTaskQuery('scd', semantic))
        self.assertIn(',', text.tokenize(instruction))
        self.assertTrue(vocabulary.covers(instruction))
        self.assertNotIn('a', vocabulary.tokenToId)
        with self.assertNoLogs('unichange.text', level='WARNING'):
            ids = vocabulary.encode(instruction)
        self.assertNotIn(vocabulary.unkId, ids)

    def test_vocabulary_file(self):
        text = self.unichange.text
        path = os.path.join(self.this_path, 'test_vocabulary.json')
        self.output_files.append(path)
        vocabulary = text.TokenVocabulary(('tree',))
        vocabulary.save(path)
        self.assertEqual(text.TokenVocabulary.load(path), vocabulary)

    def test_language_model_shapes(self):
        text = self.unichange.text
        vocabulary = text.TokenVocabulary(('tree',))
        lm = text.StubLanguageModel(len(vocabulary), width=32, heads=4, layers=1)
        ids = torch.tensor([[vocabulary.bosId] + vocabulary.encode("the change mask is")])
        hidden, logits = lm(ids)
        self.assertEqual(tuple(hidden.shape), (1, ids.shape[1], 32))
        self.assertEqual(tuple(logits.shape), (1, ids.shape[1], len(vocabulary)))
        prefix = torch.zeros(1, 3, 32)
        hidden, _ = lm(ids, prefix)
        self.assertEqual(hidden.shape[1], ids.shape[1])

    def test_causality(self):
        text = self.unichange.text
        vocabulary = text.TokenVocabulary()
        lm = text.StubLanguageModel(len(vocabulary), width=32, heads=4, layers=2)
        first = lm(torch.tensor([[1, 8, 9, 10]]))[0]
        second = lm(torch.tensor([[1, 8, 9, 11]]))[0]
        torch.testing.assert_close(first[:, :3], second[:, :3])

    def test_extract_task_embeddings(self):
        text = self.unichange.text
        building, semantic = self.vocabularies()
        torch.manual_seed(0)
        codec = text.InstructionCodec(text.TokenVocabulary(('building', 'water', 'low vegetation')), decoderWidth=16,
                                      lmWidth=32, layers=1)
        bcd = codec.extractTaskEmbeddings(text.makeTaskQuery('bcd', building))
        self.assertEqual(tuple(bcd.projected.shape), (3, 16))
        self.assertEqual(bcd.present, (False, False, True))
        self.assertIsNone(bcd.raw[0])
        self.assertEqual(tuple(bcd.raw[2].shape), (32,))
        self.assertTrue(torch.isfinite(bcd.txtLoss))
        torch.testing.assert_close(bcd.hT1, codec.defaultQueries[0])
        scd = codec.extractTaskEmbeddings(text.makeTaskQuery('scd', semantic))
        self.assertEqual(scd.present, (True, True, True))
        # A response without task tokens falls back to the learned default queries.
        generated = codec.extractTaskEmbeddings(text.makeTaskQuery('scd', semantic), text.GENERATED,
                                                response=codec.vocabulary.encode("the change mask is"))
        self.assertEqual(generated.present, (False, False, False))
        self.assertIsNone(generated.txtLoss)
        torch.testing.assert_close(generated.projected, codec.defaultQueries)
        with self.assertRaises(self.unichange.BadArguments):
            codec.extractTaskEmbeddings(text.makeTaskQuery('bcd', building), 'sampled')

    def test_class_name_embeddings(self):
        text = self.unichange.text
        _, semantic = self.vocabularies()
        codec = text.InstructionCodec(text.TokenVocabulary(('water', 'low vegetation')), 16, 32, layers=1)
        names = codec.classNameEmbeddings(semantic)
        self.assertEqual(tuple(names.shape), (3, 32))
        words = codec.lm.tokenEmbedding(torch.tensor(codec.vocabulary.encode("low vegetation"))).mean(dim=0)
        torch.testing.assert_close(names[2], words)

    def test_text_loss_gradient(self):
        text = self.unichange.text
        lib = self.unichange.lib
        building, _ = self.vocabularies()
        torch.manual_seed(1)
        codec = text.InstructionCodec(text.TokenVocabulary(('building',)), 16, 16, heads=2, layers=1).double()
        query = text.makeTaskQuery('bcd', building)
        tensors = [codec.lm.head.weight, codec.lm.tokenEmbedding.weight, codec.lm.blocks[0].attention.in_proj_weight]
        error = lib.checkGradients(lambda: codec.lmLoss(query), tensors, maxEntries=40)
        self.assertLess(error, 1e-4)

    def test_uniform_language_model_loss(self):
        text = self.unichange.text
        building, _ = self.vocabularies()
        codec = text.InstructionCodec(text.TokenVocabulary(('building',)), 16, 16, heads=2, layers=1)
        with torch.no_grad():
            codec.lm.head.weight.zero_()
            codec.lm.head.bias.zero_()
        loss = codec.lmLoss(text.makeTaskQuery('bcd', building))
        self.assertAlmostEqual(float(loss), math.log(len(codec.vocabulary)), places=5)

    def test_generation_after_fitting(self):
        text = self.unichange.text
        building, semantic = self.vocabularies()
        torch.manual_seed(2)
        codec = text.InstructionCodec(text.TokenVocabulary(('building', 'water', 'low vegetation')), 16, 32,
                                      layers=2)
        queries = [text.makeTaskQuery('bcd', building), text.makeTaskQuery('scd', semantic)]
        optimizer = torch.optim.Adam(codec.lm.parameters(), lr=3e-3)
        for _ in range(400):
            optimizer.zero_grad()
            loss = torch.stack([codec.lmLoss(query) for query in queries]).mean()
            loss.backward()
            optimizer.step()
        # The memorised responses cost almost nothing.
        with torch.no_grad():
            self.assertLess(max(float(codec.lmLoss(query)) for query in queries), 0.05)
        vocabulary = codec.vocabulary
        bcd = codec.generate(queries[0], maxLength=16)
        self.assertEqual(vocabulary.decode(bcd), "the change mask is [CHANGE].")
        self.assertNotIn(vocabulary.eosId, bcd)
        scd = codec.generate(queries[1], maxLength=16)
        for token in text.TASK_TOKENS:
            self.assertEqual(scd.count(vocabulary.tokenToId[token]), 1)
        self.assertLessEqual(len(codec.generate(queries[1], maxLength=3)), 3)

suite = unittest.TestLoader().loadTestsFromTestCase(TestInstructionCodec)

if __name__ == '__main__':
    unittest.main()

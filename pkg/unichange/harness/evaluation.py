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

'''Evaluation, prediction and standalone scoring.

Change probabilities are thresholded at 0.5 and semantic labels are the
argmax over the class channels.
'''

import os
import glob
import logging
import dataclasses
from typing import Optional

import numpy as np
import torch

from unichange.data.changeTypes import BadArguments, ClassVocabulary, TaskKind
from unichange.text.instructionCodec import makeTaskQuery, GENERATED
from unichange.vision.visionEncoder import checkImageSize, imageToTensor
from unichange.metrics.changeMetrics import ChangeMetricAccumulator
from unichange.datagen.rasterTools import readImage, readLabelMap, writeLabelMap, writeChangeFigure

LOG = logging.getLogger(__package__)

CHANGE_THRESHOLD = 0.5


@dataclasses.dataclass
class Prediction:
    """ Hard prediction of one sample: binary change and, for semantic queries, label maps. """
    change: np.ndarray
    sem_t1: Optional[np.ndarray] = None
    sem_t2: Optional[np.ndarray] = None

    def isSemantic(self):
        return self.sem_t1 is not None


def bundleToPrediction(bundle, index=0):
    """ Threshold the change probability at 0.5 and take the argmax of the semantic logits. """
    bundle = bundle.asNumpy(index)
    change = (1.0 / (1.0 + np.exp(-bundle.change_logits.astype(np.float64))) > CHANGE_THRESHOLD).astype(np.uint8)
    if not bundle.isSemantic():
        return Prediction(change)
    return Prediction(change, np.argmax(bundle.t1_logits, axis=0).astype(np.uint8),
                      np.argmax(bundle.t2_logits, axis=0).astype(np.uint8))


def modelPredictor(model, mode=GENERATED, maxResponseLength=16):
    """ Predictor running ``model``. Generated responses are computed once per query. """
    responses = {}
    def predictor(sample, query):
        response = None
        if mode == GENERATED:
            if query not in responses:
                responses[query] = model.codec.generate(query, maxResponseLength)
                LOG.info('Response to "'+query.instruction+'": '+model.tokenVocabulary.decode(responses[query]))
            response = responses[query]
        dtype = next(model.parameters()).dtype
        with torch.no_grad():
            output = model(imageToTensor(sample.pair.img1, dtype), imageToTensor(sample.pair.img2, dtype), query,
                           mode, response, maxResponseLength)
        return bundleToPrediction(output.bundle)
    return predictor


def oraclePredictor(sample, query):
    """ Ground truth as prediction. """
    gt = sample.gt
    if gt.isSemantic():
        return Prediction(np.asarray(gt.change_mask), np.asarray(gt.sem_t1), np.asarray(gt.sem_t2))
    return Prediction(np.asarray(gt.change_mask))


def randomPredictor(seed=0):
    """ Bernoulli(0.5) change and uniform labels, for sanity baselines. """
    rng = np.random.default_rng(seed)
    def predictor(sample, query):
        shape = (sample.pair.height, sample.pair.width)
        change = rng.integers(0, 2, size=shape).astype(np.uint8)
        if query.task != TaskKind.SCD:
            return Prediction(change)
        return Prediction(change, rng.integers(0, query.numClasses, size=shape).astype(np.uint8),
                          rng.integers(0, query.numClasses, size=shape).astype(np.uint8))
    return predictor


def evaluate(model, source, split='test', predictor=None, mode=GENERATED, maxResponseLength=16):
    """ Score one split of a source.

    :arg model: UniChangeModel, or None when ``predictor`` is given.
    :arg source: DatasetManifest or SampleSource.
    :arg str split: Split to score.
    :arg predictor: Optional callable (sample, query) -> Prediction replacing the model.
    :arg str mode: Task-embedding extraction mode of the model.
    :returns: metric report with the keys of REPORT_KEYS.
    :raises: BadArguments for a missing split or a task/annotation mismatch.
    """
    count = source.splitSize(split)
    if count == 0:
        raise BadArguments('Error: source '+source.source_id+' has no samples in split '+str(split)+'.\n')
    if predictor is None:
        if model is None:
            raise BadArguments('Error: evaluation needs a model or a predictor.\n')
        model.eval()
        predictor = modelPredictor(model, mode, maxResponseLength)
    query = makeTaskQuery(source.task, source.vocabulary)
    semantic = query.task == TaskKind.SCD
    accumulator = ChangeMetricAccumulator(source.vocabulary.size if semantic else None)
    for index in range(count):
        sample = source.loadSample(split, index)
        if sample.gt.isSemantic() != semantic:
            raise BadArguments('Error: sample '+str(index)+' of source '+source.source_id+
                               ' does not carry the annotations of a '+query.task.value+' task.\n')
        prediction = predictor(sample, query)
        if prediction.isSemantic() != semantic:
            raise BadArguments('Error: prediction for a '+query.task.value+' task has the wrong kind.\n')
        if semantic:
            accumulator.addSemantic(prediction.change, sample.gt.change_mask, prediction.sem_t1, prediction.sem_t2,
                                    sample.gt.sem_t1, sample.gt.sem_t2)
        else:
            accumulator.addBinary(prediction.change, sample.gt.change_mask)
    report = accumulator.report()
    LOG.info('Evaluated '+str(count)+' samples of source '+source.source_id+' split '+split)
    return report


def changeProbabilities(model, img1, img2, query):
    """ Sigmoid of the change logits of one pair, generated mode. :returns: H x W array. """
    dtype = next(model.parameters()).dtype
    model.eval()
    with torch.no_grad():
        output = model(imageToTensor(img1, dtype), imageToTensor(img2, dtype), query, GENERATED)
    return torch.sigmoid(output.bundle.change_logits[0]).cpu().numpy()


def predict(model, t1Path, t2Path, query, outDir, figure=False, mode=GENERATED):
    """ Predict one image pair and write the masks.

    Writes ``change.png`` (binary) and, for semantic queries, ``sem1.png`` and
    ``sem2.png`` (paletted), plus ``figure.png`` when asked.

    :returns: list of written mask files, figure excluded.
    :raises: BadArguments if the images are not divisible by 32.
    """
    img1 = readImage(t1Path)
    img2 = readImage(t2Path)
    if img1.shape != img2.shape:
        raise BadArguments('Error: images '+t1Path+' and '+t2Path+' have different shapes.\n')
    checkImageSize(img1.shape[0], img1.shape[1])
    if not os.path.isdir(outDir):
        os.makedirs(outDir)
    model.eval()
    dtype = next(model.parameters()).dtype
    with torch.no_grad():
        output = model(imageToTensor(img1, dtype), imageToTensor(img2, dtype), query, mode)
    prediction = bundleToPrediction(output.bundle)
    written = [os.path.join(outDir, 'change.png')]
    writeLabelMap(written[0], prediction.change)
    if prediction.isSemantic():
        written.append(os.path.join(outDir, 'sem1.png'))
        written.append(os.path.join(outDir, 'sem2.png'))
        writeLabelMap(written[1], prediction.sem_t1)
        writeLabelMap(written[2], prediction.sem_t2)
    if figure:
        writeChangeFigure(os.path.join(outDir, 'figure.png'), img1, img2, prediction.change, prediction.sem_t1,
                          prediction.sem_t2, query.vocabulary.names, query.instruction)
    LOG.info('Wrote '+str(len(written))+' mask files to '+outDir)
    return written


def scoreDirectories(predDir, gtDir, numClasses=None):
    """ Score predicted mask files against ground truth files of the same names.

    Files follow the ``<idx>_change.png``, ``<idx>_sem1.png``, ``<idx>_sem2.png``
    naming. Ground truth with semantic maps is scored as semantic change
    detection; the class count is the largest label found unless given.

    :rtype: dict
    """
    changeFiles = sorted(glob.glob(os.path.join(gtDir, '*_change.png')))
    if not changeFiles:
        raise BadArguments('Error: no *_change.png ground truth files in '+gtDir+'.\n')
    pairs = []
    for gtChange in changeFiles:
        stem = os.path.basename(gtChange)[:-len('_change.png')]
        predChange = os.path.join(predDir, os.path.basename(gtChange))
        if not os.path.isfile(predChange):
            raise BadArguments('Error: prediction '+predChange+' is missing.\n')
        pairs.append((stem, gtChange, predChange))
    semantic = os.path.isfile(os.path.join(gtDir, pairs[0][0] + '_sem1.png'))
    loaded = []
    largest = 0
    for stem, gtChange, predChange in pairs:
        entry = [readLabelMap(predChange), readLabelMap(gtChange)]
        if semantic:
            for directory in (predDir, gtDir):
                for suffix in ('_sem1.png', '_sem2.png'):
                    labels = readLabelMap(os.path.join(directory, stem + suffix))
                    largest = max(largest, int(labels.max()) if labels.size else 0)
                    entry.append(labels)
        loaded.append(entry)
    if semantic:
        numClasses = numClasses if numClasses is not None else max(largest, 1)
    accumulator = ChangeMetricAccumulator(numClasses if semantic else None)
    for entry in loaded:
        if semantic:
            accumulator.addSemantic(entry[0], entry[1], entry[2], entry[3], entry[4], entry[5])
        else:
            accumulator.addBinary(entry[0], entry[1])
    LOG.info('Scored '+str(len(loaded))+' prediction files of '+predDir)
    return accumulator.report()


def queryFromArguments(task, classNames=None):
    """ TaskQuery from a task name and an optional comma-separated class list. """
    names = tuple(name.strip() for name in classNames.split(',') if name.strip()) if classNames else ()
    if not names:
        vocabulary = ClassVocabulary.generic()
    else:
        vocabulary = ClassVocabulary(names)
    return makeTaskQuery(task, vocabulary)

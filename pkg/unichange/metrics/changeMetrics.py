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

'''Change detection metrics.

Binary change detection is scored with precision, recall, F1 and IoU of the
changed class. Semantic change detection is scored from a confusion matrix
Q accumulated over both temporal label maps, where q_ij counts pixels
predicted as class i with ground truth j and class 0 is "no change".
'''

import math
import json
import logging
import dataclasses

import numpy as np

from unichange.data.changeTypes import BadArguments

LOG = logging.getLogger(__package__)

REPORT_KEYS = ("P", "R", "F1", "IoU", "mIoU", "SeK", "F_scd", "IoU_nc", "IoU_c")


def _ratio(numerator, denominator):
    return float(numerator) / float(denominator) if denominator else 0.0


@dataclasses.dataclass(frozen=True)
class BinaryCounts:
    """ Pixel tallies of a binary prediction. """
    TP: int = 0
    FP: int = 0
    FN: int = 0
    TN: int = 0

    def __add__(self, other):
        return BinaryCounts(self.TP + other.TP, self.FP + other.FP, self.FN + other.FN, self.TN + other.TN)

    @property
    def total(self):
        return self.TP + self.FP + self.FN + self.TN


def binaryCounts(pred, gt):
    """ Tally true/false positives/negatives.

    :arg pred: Binary prediction.
    :arg gt: Binary ground truth of the same shape.
    :rtype: BinaryCounts
    """
    pred = np.asarray(pred).astype(bool)
    gt = np.asarray(gt).astype(bool)
    if pred.shape != gt.shape:
        raise BadArguments('Error: prediction of shape '+str(pred.shape)+' does not match ground truth of shape '+
                           str(gt.shape)+'.\n')
    tp = int(np.count_nonzero(pred & gt))
    fp = int(np.count_nonzero(pred & ~gt))
    fn = int(np.count_nonzero(~pred & gt))
    return BinaryCounts(tp, fp, fn, int(pred.size) - tp - fp - fn)


def bcdMetrics(counts):
    """ Precision, recall, F1 and IoU.

    Zero denominators give 0, except when neither prediction nor ground truth
    holds a positive pixel: that is perfect agreement and every metric is 1.

    :rtype: tuple
    """
    if counts.TP + counts.FP + counts.FN == 0:
        return 1.0, 1.0, 1.0, 1.0
    precision = _ratio(counts.TP, counts.TP + counts.FP)
    recall = _ratio(counts.TP, counts.TP + counts.FN)
    f1 = _ratio(2.0 * precision * recall, precision + recall)
    iou = _ratio(counts.TP, counts.TP + counts.FP + counts.FN)
    return precision, recall, f1, iou


@dataclasses.dataclass(frozen=True)
class ScdConfusion:
    """ (N+1) x (N+1) confusion matrix, rows are predictions. """
    matrix: np.ndarray

    @property
    def numClasses(self):
        """ Change-class count N. """
        return self.matrix.shape[0] - 1

    def __add__(self, other):
        return ScdConfusion(self.matrix + other.matrix)


def _matrix(confusion):
    matrix = confusion.matrix if isinstance(confusion, ScdConfusion) else confusion
    return np.asarray(matrix, dtype=np.int64)


def scdConfusion(predT1, predT2, gtT1, gtT2, numClasses):
    """ Confusion matrix accumulated over both temporal label maps.

    :arg int numClasses: Change-class count N; labels lie in [0, N].
    :rtype: ScdConfusion
    """
    size = numClasses + 1
    maps = [np.asarray(labels, dtype=np.int64) for labels in (predT1, predT2, gtT1, gtT2)]
    if len(set(labels.shape for labels in maps)) != 1:
        raise BadArguments('Error: semantic label maps have inconsistent shapes.\n')
    for labels in maps:
        if labels.size and (labels.min() < 0 or labels.max() >= size):
            raise BadArguments('Error: semantic label '+str(int(labels.max()))+' outside [0, '+str(numClasses)+'].\n')
    predicted = np.concatenate([maps[0].ravel(), maps[1].ravel()])
    truth = np.concatenate([maps[2].ravel(), maps[3].ravel()])
    counts = np.bincount(predicted * size + truth, minlength=size * size)
    return ScdConfusion(counts.reshape(size, size))


def miou(confusion):
    """ IoU of the unchanged class, IoU of all change classes pooled, and their mean.

    :rtype: tuple
    """
    q = _matrix(confusion)
    unchanged = _ratio(q[0, 0], q[:, 0].sum() + q[0, :].sum() - q[0, 0])
    changed = _ratio(q[1:, 1:].sum(), q.sum() - q[0, 0])
    return unchanged, changed, (unchanged + changed) / 2.0


def sek(confusion):
    """ Separated kappa: kappa of Q with q_00 removed, scaled by exp(IoU_c - 1).

    An all-zero reduced matrix gives 0; an expected agreement of 1 gives
    kappa 1 when the observed agreement is 1, else 0.
    """
    q = _matrix(confusion).astype(np.float64)
    _, changed, _ = miou(confusion)
    reduced = q.copy()
    reduced[0, 0] = 0.0
    total = reduced.sum()
    if total == 0:
        return 0.0
    observed = np.trace(reduced) / total
    expected = float(np.dot(reduced.sum(axis=1), reduced.sum(axis=0))) / total ** 2
    if expected == 1.0:
        kappa = 1.0 if observed == 1.0 else 0.0
    else:
        kappa = (observed - expected) / (1.0 - expected)
    return math.exp(changed - 1.0) * kappa


def fScd(confusion):
    """ Precision and recall over the change classes and their harmonic mean.

    :rtype: tuple
    """
    q = _matrix(confusion)
    hits = np.trace(q[1:, 1:])
    precision = _ratio(hits, q[1:, :].sum())
    recall = _ratio(hits, q[:, 1:].sum())
    return precision, recall, _ratio(2.0 * precision * recall, precision + recall)


def emptyReport():
    return dict((key, None) for key in REPORT_KEYS)


class ChangeMetricAccumulator(object):
    """ Running tallies for one evaluation.

    Binary counts are always kept; a confusion matrix is kept as well when
    the accumulator is built with a change-class count.
    """
    def __init__(self, numClasses=None):
        self.counts = BinaryCounts()
        self.numClasses = numClasses
        self.confusion = None
        if numClasses is not None:
            self.confusion = ScdConfusion(np.zeros((numClasses + 1, numClasses + 1), dtype=np.int64))
        self.samples = 0

    def addBinary(self, pred, gt):
        self.counts = self.counts + binaryCounts(pred, gt)
        self.samples += 1

    def addSemantic(self, predChange, gtChange, predT1, predT2, gtT1, gtT2):
        """ Add one semantic sample. Label maps are masked by their change masks first. """
        if self.confusion is None:
            raise BadArguments('Error: accumulator was built for binary change detection.\n')
        self.addBinary(predChange, gtChange)
        predChange = np.asarray(predChange).astype(np.int64)
        gtChange = np.asarray(gtChange).astype(np.int64)
        self.confusion = self.confusion + scdConfusion(np.asarray(predT1) * predChange, np.asarray(predT2) * predChange,
                                                       np.asarray(gtT1) * gtChange, np.asarray(gtT2) * gtChange,
                                                       self.numClasses)

    def report(self):
        """ Metric report with the keys of REPORT_KEYS; semantic keys are None for binary runs. """
        report = emptyReport()
        precision, recall, f1, iou = bcdMetrics(self.counts)
        report.update(P=precision, R=recall, F1=f1, IoU=iou)
        if self.confusion is not None:
            unchanged, changed, mean = miou(self.confusion)
            report.update(IoU=changed, mIoU=mean, SeK=sek(self.confusion), F_scd=fScd(self.confusion)[2],
                          IoU_nc=unchanged, IoU_c=changed)
        return report


def formatReport(report):
    """ Two-line table of a metric report, values with 5 decimals. :rtype: str """
    header = " ".join("%9s" % key for key in REPORT_KEYS)
    values = " ".join("%9s" % ("-" if report.get(key) is None else "%.5f" % report[key]) for key in REPORT_KEYS)
    return header + "\n" + values


def writeReport(report, path):
    LOG.info('Writing metric report to '+path)
    with open(path, 'w') as reportFile:
        json.dump(report, reportFile, indent=1)

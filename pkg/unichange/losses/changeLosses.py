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

'''Training losses.

The total loss is the text loss plus a weighted sum of binary cross-entropy,
Dice, semantic segmentation and semantic consistency terms. The two semantic
terms are only built for semantic batches; on binary batches they are exact
zeros outside the autograd graph.
'''

import logging
import dataclasses

import torch
import torch.nn.functional as F

from unichange.data.changeTypes import BadArguments

LOG = logging.getLogger(__package__)

DICE_SMOOTHING = 1.0
SEMANTIC_SUPERVISION = ('both', 't1', 't2', 'none')


@dataclasses.dataclass
class LossWeights:
    """ Weights of the mask loss terms. """
    bce: float = 2.0
    dice: float = 0.5
    ss: float = 0.5
    sc: float = 1.0

    def __post_init__(self):
        for field in dataclasses.fields(self):
            value = getattr(self, field.name)
            if value < 0:
                raise BadArguments('Error: loss weight '+field.name+' is negative ('+str(value)+').\n')

    @classmethod
    def fromDict(cls, weights):
        unknown = set(weights) - set(field.name for field in dataclasses.fields(cls))
        if unknown:
            raise BadArguments('Error: unknown loss weights '+', '.join(sorted(unknown))+'.\n')
        return cls(**weights)


@dataclasses.dataclass
class LossReport:
    """ Loss terms of one batch. ``gated`` marks binary batches, where ss = sc = 0. """
    total: torch.Tensor
    txt: torch.Tensor
    bce: torch.Tensor
    dice: torch.Tensor
    ss: torch.Tensor
    sc: torch.Tensor
    gated: bool
    mask: torch.Tensor = None

    def terms(self):
        return {'total': self.total, 'txt': self.txt, 'bce': self.bce, 'dice': self.dice,
                'ss': self.ss, 'sc': self.sc}

    def asFloats(self):
        floats = dict((name, float(value.detach())) for name, value in self.terms().items())
        floats['gated'] = self.gated
        return floats


def _checkShapes(logits, target, name):
    if tuple(logits.shape) != tuple(target.shape):
        raise BadArguments('Error: '+name+' logits of shape '+str(tuple(logits.shape))+
                           ' do not match target of shape '+str(tuple(target.shape))+'.\n')


def bceLoss(changeLogits, gt):
    """ Mean binary cross-entropy of sigmoid(logits), in log-sum-exp form.

    :arg changeLogits: (H, W) or (B, H, W) logits.
    :arg gt: Binary mask of the same shape.
    """
    _checkShapes(changeLogits, gt, 'change')
    return F.binary_cross_entropy_with_logits(changeLogits, gt.to(changeLogits.dtype))


def diceLoss(changeLogits, gt, smoothing=DICE_SMOOTHING):
    """ 1 - (2 sum(p g) + eps) / (sum(p) + sum(g) + eps), per sample then averaged over the batch. """
    _checkShapes(changeLogits, gt, 'change')
    if changeLogits.dim() < 3:
        changeLogits = changeLogits[None]
        gt = gt[None]
    probabilities = torch.sigmoid(changeLogits).flatten(1)
    target = gt.to(changeLogits.dtype).flatten(1)
    overlap = (probabilities * target).sum(dim=1)
    dice = (2.0 * overlap + smoothing) / (probabilities.sum(dim=1) + target.sum(dim=1) + smoothing)
    return (1.0 - dice).mean()


def _crossEntropy(logits, labels):
    if logits.dim() == 3:
        logits = logits[None]
        labels = labels[None]
    labels = labels.long()
    if labels.shape != logits.shape[:1] + logits.shape[2:]:
        raise BadArguments('Error: label map of shape '+str(tuple(labels.shape))+' does not match logits of shape '+
                           str(tuple(logits.shape))+'.\n')
    if labels.numel() and (int(labels.max()) >= logits.shape[1] or int(labels.min()) < 0):
        raise BadArguments('Error: semantic label '+str(int(labels.max()))+' outside the '+str(logits.shape[1])+
                           ' predicted classes.\n')
    return F.cross_entropy(logits, labels)


def ssLoss(t1Logits, t2Logits, semT1, semT2, supervision='both'):
    """ Mean multi-class cross-entropy of the semantic maps.

    :arg t1Logits: (C, H, W) or (B, C, H, W) logits of the first time; t2Logits likewise.
    :arg semT1: Label maps in [0, C); semT2 likewise.
    :arg str supervision: Which times are supervised: both, t1, t2 or none.
    """
    if supervision not in SEMANTIC_SUPERVISION:
        raise BadArguments('Error: semantic supervision must be one of '+', '.join(SEMANTIC_SUPERVISION)+'.\n')
    terms = []
    if supervision in ('both', 't1'):
        terms.append(_crossEntropy(t1Logits, semT1))
    if supervision in ('both', 't2'):
        terms.append(_crossEntropy(t2Logits, semT2))
    if not terms:
        return t1Logits.new_zeros(())
    return torch.stack(terms).mean()


def scLoss(streamT1, streamT2, gtChange):
    """ Cosine consistency of the semantic streams.

    Per stride-4 cell with cosine similarity s: 1 - s where unchanged,
    max(0, s) where changed. The change mask is downsampled by nearest
    neighbour; zero vectors have s = 0.

    :arg streamT1: (d, h, w) or (B, d, h, w) stream; streamT2 likewise.
    :arg gtChange: (H, W) or (B, H, W) binary mask.
    """
    if streamT1.shape != streamT2.shape:
        raise BadArguments('Error: semantic streams have different shapes.\n')
    if streamT1.dim() == 3:
        streamT1 = streamT1[None]
        streamT2 = streamT2[None]
        gtChange = gtChange[None]
    changed = F.interpolate(gtChange[:, None].to(streamT1.dtype), size=streamT1.shape[-2:], mode='nearest')[:, 0]
    similarity = F.cosine_similarity(streamT1, streamT2, dim=1, eps=1e-12)
    contribution = torch.where(changed > 0.5, torch.clamp(similarity, min=0.0), 1.0 - similarity)
    return contribution.mean()


@dataclasses.dataclass
class MaskLossFragment:
    bce: torch.Tensor
    dice: torch.Tensor
    ss: torch.Tensor
    sc: torch.Tensor
    weighted: torch.Tensor
    gated: bool


def maskLoss(bundle, gt, streams, weights, isScd, supervision='both'):
    """ Weighted mask loss.

    :arg MaskBundle bundle: Predicted logits.
    :arg GroundTruth gt: Batched targets (tensors).
    :arg FusedStreams streams: The stride-4 streams of the same pass.
    :arg LossWeights weights: Term weights.
    :arg bool isScd: Semantic batch. Binary batches never build the semantic terms.
    :rtype: MaskLossFragment
    """
    if isScd != bundle.isSemantic() or isScd != gt.isSemantic():
        raise BadArguments('Error: semantic flag '+str(isScd)+' disagrees with the logits or the annotations.\n')
    bce = bceLoss(bundle.change_logits, gt.change_mask)
    dice = diceLoss(bundle.change_logits, gt.change_mask)
    weighted = weights.bce * bce + weights.dice * dice
    if isScd:
        ss = ssLoss(bundle.t1_logits, bundle.t2_logits, gt.sem_t1, gt.sem_t2, supervision)
        sc = scLoss(streams.t1, streams.t2, gt.change_mask)
        weighted = weighted + weights.ss * ss + weights.sc * sc
    else:
        ss = bce.new_zeros(())
        sc = bce.new_zeros(())
    return MaskLossFragment(bce, dice, ss, sc, weighted, not isScd)


def totalLoss(txt, fragment):
    """ Text loss plus mask loss. :rtype: LossReport """
    return LossReport(total=txt + fragment.weighted, txt=txt, bce=fragment.bce, dice=fragment.dice,
                      ss=fragment.ss, sc=fragment.sc, gated=fragment.gated, mask=fragment.weighted)

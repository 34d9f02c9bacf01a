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

'''The complete change detection model: instruction codec, vision encoder and token-driven decoder.'''

import logging
import dataclasses
from typing import Optional

import torch
from torch import nn

from unichange.data.changeTypes import BadArguments, TaskKind
from unichange.text.instructionCodec import InstructionCodec, TEACHER_FORCED
from unichange.vision.visionEncoder import VisionEncoder
from unichange.decoder.tokenDecoder import TokenDrivenDecoder, initQueries

LOG = logging.getLogger(__package__)


@dataclasses.dataclass
class ModelOutput:
    bundle: object
    streams: object
    embeddings: object
    txtLoss: Optional[torch.Tensor]


class UniChangeModel(nn.Module):
    """ Instruction-conditioned change detector.

    :arg TokenVocabulary tokenVocabulary: Closed token vocabulary of the codec.
    :arg int width: Decoder width d_dec.
    :arg int lmWidth: Language model width d_lm.
    :arg str backbone: Registered backbone name.
    :arg int channels: Image channels.
    :arg bool freezeBackbone: Exclude the backbone from training.
    :arg int heads: Attention heads of the codec and the decoder.
    """
    def __init__(self, tokenVocabulary, width=64, lmWidth=64, backbone='toy', channels=3, freezeBackbone=False,
                 heads=4, lmLayers=2, maxLength=96):
        super(UniChangeModel, self).__init__()
        self.settings = {'width': width, 'lmWidth': lmWidth, 'backbone': backbone, 'channels': channels,
                         'freezeBackbone': freezeBackbone, 'heads': heads, 'lmLayers': lmLayers,
                         'maxLength': maxLength}
        self.codec = InstructionCodec(tokenVocabulary, width, lmWidth, heads, lmLayers, maxLength)
        self.encoder = VisionEncoder(backbone, channels, width, freezeBackbone)
        self.decoder = TokenDrivenDecoder(width, lmWidth, heads)

    @property
    def tokenVocabulary(self):
        return self.codec.vocabulary

    def semanticParameters(self):
        """ Parameters used only by semantic queries. """
        return (list(self.decoder.fuseT1.parameters()) + list(self.decoder.fuseT2.parameters()) +
                list(self.decoder.classBank.parameters()))

    def forward(self, images1, images2, query, mode=TEACHER_FORCED, response=None, maxResponseLength=16):
        """ Run the full pipeline on a batch of image pairs sharing one query.

        The task embeddings are computed once per batch and broadcast over it.

        :arg images1: (B, C, H, W) first images.
        :arg images2: (B, C, H, W) second images.
        :arg TaskQuery query: Instruction and vocabulary of the batch.
        :arg str mode: Task-embedding extraction mode.
        :rtype: ModelOutput
        """
        if images1.dim() != 4:
            raise BadArguments('Error: the model expects (B, C, H, W) images, got shape '+
                               str(tuple(images1.shape))+'.\n')
        embeddings = self.codec.extractTaskEmbeddings(query, mode, response, maxResponseLength)
        queries = initQueries(embeddings).to(images1.dtype)
        names = self.codec.classNameEmbeddings(query.vocabulary)
        pyramid1, pyramid2 = self.encoder.encodePair(images1, images2)
        semantic = query.task == TaskKind.SCD
        bundle, streams = self.decoder(pyramid1, pyramid2, queries, names, images1.shape[-2:], semantic)
        txtLoss = embeddings.txtLoss
        if txtLoss is None:
            txtLoss = bundle.change_logits.new_zeros(())
        return ModelOutput(bundle, streams, embeddings, txtLoss)

    def generateResponse(self, query, maxLength=16):
        """ Greedy response of the codec, decoded to text. :rtype: str """
        return self.codec.vocabulary.decode(self.codec.generate(query, maxLength))

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

'''Token driven mask decoder.

Three task queries, rows (t1, t2, change), are refined level by level against
the concatenated visual tokens of both temporal pyramids. The refined visual
tokens are folded back into maps, fused into three stride-4 streams, and the
final queries are turned into mask embeddings whose dot products with the
streams give the mask logits.
'''

import math
import logging
import dataclasses
from typing import Optional

import torch
import torch.nn as nn
import torch.nn.functional as F

from unichange.data.changeTypes import BadArguments, MaskBundle

LOG = logging.getLogger(__package__)

NUM_LEVELS = 4
QUERY_ROWS = ('t1', 't2', 'change')


def sinePositionalEncoding(height, width, channels, dtype=torch.float32, device=None, temperature=10000.0):
    """ Fixed 2D sine/cosine encoding, rows first, for a height x width grid.

    Half of the channels encode the row, half the column.

    :returns: (height*width, channels) tensor in row-major cell order.
    """
    if channels % 4 != 0:
        raise BadArguments('Error: sine positional encoding needs a width divisible by 4, got '+str(channels)+'.\n')
    quarter = channels // 4
    frequencies = 1.0 / (temperature ** (torch.arange(quarter, dtype=torch.float64, device=device) / quarter))
    rows = torch.arange(height, dtype=torch.float64, device=device)[:, None] * frequencies[None]
    columns = torch.arange(width, dtype=torch.float64, device=device)[:, None] * frequencies[None]
    rowCode = torch.cat([rows.sin(), rows.cos()], dim=1)[:, None, :].expand(height, width, 2 * quarter)
    columnCode = torch.cat([columns.sin(), columns.cos()], dim=1)[None, :, :].expand(height, width, 2 * quarter)
    return torch.cat([rowCode, columnCode], dim=2).reshape(height * width, channels).to(dtype)


def initQueries(embeddings):
    """ Initial query matrix E0 with rows (t1, t2, change).

    :arg embeddings: TaskEmbeddings, or a (3, d) tensor of projected embeddings.
    :returns: (3, d) tensor.
    """
    projected = getattr(embeddings, 'projected', embeddings)
    if projected.shape[0] != 3:
        raise BadArguments('Error: expected three task embeddings, got '+str(projected.shape[0])+'.\n')
    return torch.stack([projected[0], projected[1], projected[2]])


def flattenConcat(features1, features2):
    """ Visual token sequence of one level.

    :arg features1: (B, d, h, w) features of the first image.
    :arg features2: (B, d, h, w) features of the second image.
    :returns: (B, 2*h*w, d) tokens, row-major, first image first.
    """
    if features1.shape != features2.shape:
        raise BadArguments('Error: cannot concatenate feature maps of shapes '+str(tuple(features1.shape))+
                           ' and '+str(tuple(features2.shape))+'.\n')
    return torch.cat([features1.flatten(2).transpose(1, 2), features2.flatten(2).transpose(1, 2)], dim=1)


def splitReshape(tokens, height, width):
    """ Inverse of flattenConcat.

    :arg tokens: (B, 2*h*w, d) sequence.
    :returns: two (B, d, h, w) maps.
    """
    count = tokens.shape[1]
    if count % 2 != 0:
        raise BadArguments('Error: visual sequence of odd length '+str(count)+' cannot be split.\n')
    if count != 2 * height * width:
        raise BadArguments('Error: visual sequence of length '+str(count)+' does not match a '+
                           str(height)+'x'+str(width)+' grid.\n')
    half = count // 2
    batch, channels = tokens.shape[0], tokens.shape[2]
    first = tokens[:, :half].transpose(1, 2).reshape(batch, channels, height, width)
    second = tokens[:, half:].transpose(1, 2).reshape(batch, channels, height, width)
    return first, second


def _withPosition(tensor, position):
    return tensor if position is None else tensor + position


class DecoderLayer(nn.Module):
    """ One refinement level.

    Query self-attention, query to visual cross-attention and a feedforward
    block update the queries; visual to query cross-attention then updates
    the visual tokens. Every sub-block is pre-normalised with a residual
    connection; positional encodings are added to queries and keys only.
    """
    def __init__(self, width, heads=4, expansion=4):
        super(DecoderLayer, self).__init__()
        self.selfAttention = nn.MultiheadAttention(width, heads, batch_first=True)
        self.queryToVisual = nn.MultiheadAttention(width, heads, batch_first=True)
        self.visualToQuery = nn.MultiheadAttention(width, heads, batch_first=True)
        self.feedforward = nn.Sequential(nn.Linear(width, expansion * width), nn.GELU(),
                                         nn.Linear(expansion * width, width))
        self.normSelf = nn.LayerNorm(width)
        self.normCrossQuery = nn.LayerNorm(width)
        self.normCrossVisual = nn.LayerNorm(width)
        self.normFeedforward = nn.LayerNorm(width)
        self.normVisual = nn.LayerNorm(width)
        self.normQueryMemory = nn.LayerNorm(width)

    def forward(self, queries, visual, queryPosition=None, visualPosition=None):
        """ :returns: refined queries (B, 3, d) and refined visual tokens (B, n, d). """
        normed = self.normSelf(queries)
        keyed = _withPosition(normed, queryPosition)
        queries = queries + self.selfAttention(keyed, keyed, normed, need_weights=False)[0]

        normed = self.normCrossQuery(queries)
        memory = self.normCrossVisual(visual)
        queries = queries + self.queryToVisual(_withPosition(normed, queryPosition),
                                               _withPosition(memory, visualPosition),
                                               memory, need_weights=False)[0]

        queries = queries + self.feedforward(self.normFeedforward(queries))

        normedVisual = self.normVisual(visual)
        memory = self.normQueryMemory(queries)
        visual = visual + self.visualToQuery(_withPosition(normedVisual, visualPosition),
                                             _withPosition(memory, queryPosition),
                                             memory, need_weights=False)[0]
        return queries, visual


@dataclasses.dataclass
class FusedStreams:
    """ Stride-4 maps (B, d, H/4, W/4). The semantic streams exist only for semantic queries. """
    change: torch.Tensor
    t1: Optional[torch.Tensor] = None
    t2: Optional[torch.Tensor] = None


@dataclasses.dataclass
class ProjectedTaskEmbeddings:
    """ Mask embeddings: change (B, d) and per-class banks (B, C, d). """
    change: torch.Tensor
    t1: torch.Tensor
    t2: torch.Tensor


def fusionBlock(width):
    """ 1x1 convolution from the concatenated levels back to ``width``, GELU, then a second 1x1 convolution.

    The nonlinearity lets the change stream respond to both signs of the
    temporal difference.
    """
    return nn.Sequential(nn.Conv2d(NUM_LEVELS * width, width, 1), nn.GELU(), nn.Conv2d(width, width, 1))


class TokenDrivenDecoder(nn.Module):
    """ Query refinement over four pyramid levels and mask generation.

    :arg int width: Decoder width d_dec.
    :arg int nameWidth: Width of the class-name embeddings (d_lm).
    :arg int heads: Attention heads.
    """
    def __init__(self, width=64, nameWidth=64, heads=4):
        super(TokenDrivenDecoder, self).__init__()
        self.width = width
        self.layers = nn.ModuleList([DecoderLayer(width, heads) for _ in range(NUM_LEVELS)])
        self.queryPosition = nn.Parameter(0.02 * torch.randn(3, width))
        self.temporalEmbedding = nn.Embedding(2, width)
        nn.init.normal_(self.temporalEmbedding.weight, std=0.02)
        self.fuseT1 = fusionBlock(width)
        self.fuseT2 = fusionBlock(width)
        self.fuseChange = fusionBlock(width)
        self.nameNorm = nn.LayerNorm(nameWidth)
        self.changeProjection = nn.Linear(width + nameWidth, width)
        self.classBank = nn.Sequential(nn.Linear(width + nameWidth, width), nn.GELU(), nn.Linear(width, width))

    def visualPosition(self, height, width, dtype, device):
        """ Sine encoding of the grid, repeated for both halves, plus the temporal index embedding. """
        grid = sinePositionalEncoding(height, width, self.width, dtype, device)
        temporal = self.temporalEmbedding.weight.to(dtype)
        return torch.cat([grid + temporal[0], grid + temporal[1]], dim=0)[None]

    def decoderLayer(self, level, queries, visual, height, width):
        """ Apply the decoder layer of one level to queries (B, 3, d) and tokens (B, 2hw, d). """
        position = self.visualPosition(height, width, visual.dtype, visual.device)
        return self.layers[level](queries, visual, self.queryPosition[None].to(visual.dtype), position)

    def refineAll(self, pyramid1, pyramid2, queries):
        """ Thread the queries through all levels, coarsest first.

        :arg pyramid1: Four (B, d, h, w) maps of the first image.
        :arg pyramid2: Four maps of the second image.
        :arg queries: (B, 3, d) or (3, d) initial queries.
        :returns: final queries (B, 3, d) and the refined sequences of every level.
        """
        if len(pyramid1) != NUM_LEVELS or len(pyramid2) != NUM_LEVELS:
            raise BadArguments('Error: the decoder needs '+str(NUM_LEVELS)+' pyramid levels per image, got '+
                               str(len(pyramid1))+' and '+str(len(pyramid2))+'.\n')
        batch = pyramid1[0].shape[0]
        if queries.dim() == 2:
            queries = queries[None]
        queries = queries.expand(batch, -1, -1)
        refined = []
        for level in range(NUM_LEVELS):
            height, width = pyramid1[level].shape[-2:]
            visual = flattenConcat(pyramid1[level], pyramid2[level])
            queries, visual = self.decoderLayer(level, queries, visual, height, width)
            refined.append(visual)
        return queries, refined

    def fuseStreams(self, levels1, levels2, semantic=True):
        """ Upsample every refined level to stride 4, concatenate and fuse with a fusion block per stream.

        The change stream fuses the differences of the two temporal maps.
        """
        if len(levels1) != NUM_LEVELS or len(levels2) != NUM_LEVELS:
            raise BadArguments('Error: stream fusion needs '+str(NUM_LEVELS)+' levels per image.\n')
        size = levels1[-1].shape[-2:]
        def stack(levels):
            return torch.cat([F.interpolate(level, size=size, mode='bilinear', align_corners=False)
                              for level in levels], dim=1)
        change = self.fuseChange(stack([first - second for first, second in zip(levels1, levels2)]))
        if not semantic:
            return FusedStreams(change)
        return FusedStreams(change, self.fuseT1(stack(levels1)), self.fuseT2(stack(levels2)))

    def splitProject(self, queries, classNameEmbeddings):
        """ Mask embeddings from the final queries.

        Name embeddings are layer-normalised first. The change embedding is a
        linear projection of the change row concatenated with the mean name
        embedding of the change classes, so sources naming different classes
        get different change masks from the same image pair. Bank row c
        depends only on its query row and the name of class c.

        :arg queries: (B, 3, d) final queries.
        :arg classNameEmbeddings: (C, d_lm) name embeddings, background first.
        :rtype: ProjectedTaskEmbeddings
        """
        if queries.dim() == 2:
            queries = queries[None]
        count = classNameEmbeddings.shape[0]
        if count < 1:
            raise BadArguments('Error: at least one class-name embedding is needed.\n')
        names = self.nameNorm(classNameEmbeddings.to(queries.dtype))
        batch = queries.shape[0]
        changeNames = names[1:].mean(dim=0) if count > 1 else names[0]
        change = self.changeProjection(torch.cat([queries[:, 2], changeNames[None].expand(batch, -1)], dim=1))
        names = names[None].expand(batch, count, names.shape[-1])
        def bank(row):
            query = queries[:, row][:, None].expand(-1, count, -1)
            return self.classBank(torch.cat([query, names], dim=2))
        return ProjectedTaskEmbeddings(change, bank(0), bank(1))

    def generateMasks(self, streams, projected, outputSize):
        """ Einstein-summation mask logits, upsampled bilinearly to the image size.

        :returns: MaskBundle of (B, H, W) change logits and, for semantic
          streams, (B, C, H, W) logits per time.
        """
        def upsample(logits):
            return F.interpolate(logits, size=tuple(outputSize), mode='bilinear', align_corners=False)
        change = upsample(torch.einsum('bdhw,bd->bhw', streams.change, projected.change)[:, None])[:, 0]
        if streams.t1 is None:
            return MaskBundle(change)
        t1 = upsample(torch.einsum('bdhw,bcd->bchw', streams.t1, projected.t1))
        t2 = upsample(torch.einsum('bdhw,bcd->bchw', streams.t2, projected.t2))
        return MaskBundle(change, t1, t2)

    def forward(self, pyramid1, pyramid2, queries, classNameEmbeddings, outputSize, semantic):
        """ Refine, fuse and generate masks.

        :returns: (MaskBundle, FusedStreams)
        """
        final, refined = self.refineAll(pyramid1, pyramid2, queries)
        levels1 = []
        levels2 = []
        for level, tokens in enumerate(refined):
            height, width = pyramid1[level].shape[-2:]
            first, second = splitReshape(tokens, height, width)
            levels1.append(first)
            levels2.append(second)
        streams = self.fuseStreams(levels1, levels2, semantic)
        projected = self.splitProject(final, classNameEmbeddings)
        return self.generateMasks(streams, projected, outputSize), streams

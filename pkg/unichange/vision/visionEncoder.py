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

'''Siamese vision encoder.

A backbone of stride 16 produces base features for each temporal image, and
a simple pyramid turns them into four levels of strides (32, 16, 8, 4).
Tensors are channel-first, (B, C, H, W).
'''

import logging

import numpy as np
import torch
import torch.nn as nn

from unichange.data.changeTypes import BadArguments, PYRAMID_STRIDE

LOG = logging.getLogger(__package__)

PYRAMID_STRIDES = (32, 16, 8, 4)

def checkImageSize(height, width):
    """ Raise BadArguments unless both dimensions are divisible by 32. """
    if height % PYRAMID_STRIDE != 0 or width % PYRAMID_STRIDE != 0:
        raise BadArguments('Error: image size '+str(height)+'x'+str(width)+
                           ' is not divisible by '+str(PYRAMID_STRIDE)+'.\n')

def imageToTensor(image, dtype=torch.float32):
    """ H x W x C array (or B x H x W x C) to a channel-first tensor with a batch axis. """
    image = np.asarray(image)
    if image.ndim == 2:
        image = image[:, :, None]
    if image.ndim == 3:
        image = image[None]
    return torch.as_tensor(np.ascontiguousarray(image.transpose(0, 3, 1, 2)), dtype=dtype)


class ToyBackbone(nn.Module):
    """ Four 3x3 convolutions of stride 2, each followed by GELU.

    :arg int inChannels: Image channels.
    :arg int width: Output width d_dec.
    :arg bool bias: Give the convolutions a bias.
    """
    outputStride = 16

    def __init__(self, inChannels=3, width=64, bias=True):
        super(ToyBackbone, self).__init__()
        schedule = (inChannels, 16, 32, 64, width)
        stages = []
        for stage in range(4):
            stages.append(nn.Conv2d(schedule[stage], schedule[stage + 1], 3, stride=2, padding=1, bias=bias))
            stages.append(nn.GELU())
        self.stages = nn.Sequential(*stages)
        self.width = width

    def forward(self, images):
        return self.stages(images)


_BACKBONES = {'toy': ToyBackbone}

def registerBackbone(name, factory):
    """ Make a backbone available by name.

    The factory is called as ``factory(inChannels=..., width=...)`` and must
    return a module mapping (B, C, H, W) images to (B, width, H/16, W/16).
    """
    _BACKBONES[name] = factory

def buildBackbone(name, inChannels=3, width=64):
    try:
        factory = _BACKBONES[name]
    except KeyError:
        raise BadArguments('Error: unknown backbone '+str(name)+', available: '+', '.join(sorted(_BACKBONES))+'.\n')
    return factory(inChannels=inChannels, width=width)


class FeaturePyramid(tuple):
    """ Four feature maps, coarsest (stride 32) first. """
    strides = PYRAMID_STRIDES

    def shapes(self):
        return [tuple(level.shape[-2:]) for level in self]


class PyramidBuilder(nn.Module):
    """ Max-pooling down to stride 32, identity at 16, transposed convolutions up to 8 and 4. """
    def __init__(self, width=64):
        super(PyramidBuilder, self).__init__()
        self.down = nn.MaxPool2d(2)
        self.up8 = nn.ConvTranspose2d(width, width, 2, stride=2)
        self.up4 = nn.Sequential(nn.ConvTranspose2d(width, width, 2, stride=2), nn.GELU(),
                                 nn.ConvTranspose2d(width, width, 2, stride=2))

    def forward(self, base):
        return FeaturePyramid((self.down(base), base, self.up8(base), self.up4(base)))


class VisionEncoder(nn.Module):
    """ Shared-weight encoder for both temporal images.

    :arg str backbone: Registered backbone name.
    :arg int inChannels: Image channels.
    :arg int width: Feature width d_dec.
    :arg bool freezeBackbone: Exclude the backbone parameters from training.
    """
    def __init__(self, backbone='toy', inChannels=3, width=64, freezeBackbone=False):
        super(VisionEncoder, self).__init__()
        self.backbone = buildBackbone(backbone, inChannels, width)
        self.pyramid = PyramidBuilder(width)
        if freezeBackbone:
            LOG.info('Freezing the '+backbone+' backbone.')
            for parameter in self.backbone.parameters():
                parameter.requires_grad_(False)

    def encode(self, images):
        """ Base features at stride 16.

        :arg images: (B, C, H, W) tensor, H and W divisible by 32.
        :returns: (B, d_dec, H/16, W/16) tensor.
        """
        checkImageSize(images.shape[-2], images.shape[-1])
        return self.backbone(images)

    def buildPyramid(self, base):
        return self.pyramid(base)

    def forward(self, images):
        return self.buildPyramid(self.encode(images))

    def encodePair(self, images1, images2):
        """ Pyramids of both temporal images, computed with the same weights.

        :rtype: tuple
        """
        if images1.shape != images2.shape:
            raise BadArguments('Error: temporal images have different shapes '+str(tuple(images1.shape))+
                               ' and '+str(tuple(images2.shape))+'.\n')
        pyramid1 = self.forward(images1)
        pyramid2 = self.forward(images2)
        LOG.debug('Pyramid level shapes: '+str(pyramid1.shapes()))
        return pyramid1, pyramid2

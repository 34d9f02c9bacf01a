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

'''Raster input and output: RGB images, paletted label maps and figures.'''

import os
import logging

import numpy as np
from PIL import Image

from unichange.data.changeTypes import BadArguments

LOG = logging.getLogger(__package__)

# Index 0 black, 1 white; further entries are distinct colours for semantic labels.
LABEL_PALETTE = [(0, 0, 0), (255, 255, 255), (230, 60, 45), (50, 200, 75), (55, 80, 225),
                 (240, 200, 40), (160, 60, 200), (40, 200, 210), (128, 128, 128)]

# Colour coding of the SECOND label maps, index = label.
SECOND_COLOUR_MAP = [(255, 255, 255), (0, 0, 255), (128, 128, 128), (0, 128, 0),
                     (0, 255, 0), (128, 0, 0), (255, 0, 0)]
SECOND_CLASS_NAMES = ('water', 'ground', 'low vegetation', 'tree', 'building', 'playground')


def _checkExists(fileName):
    if not os.path.isfile(fileName):
        raise BadArguments('Error: file '+fileName+' does not exist.\n')


def readImage(fileName):
    """ Read an 8-bit image as a float32 H x W x C array in [0,1].

    Grey-scale images get a single channel; palette images are expanded to RGB.

    :arg str fileName: Image file.
    :rtype: numpy.ndarray
    """
    _checkExists(fileName)
    LOG.debug('Reading image '+fileName)
    with Image.open(fileName) as image:
        if image.mode == 'P':
            image = image.convert('RGB')
        elif image.mode not in ('L', 'RGB', 'RGBA'):
            image = image.convert('RGB')
        array = np.asarray(image, dtype=np.float32) / 255.0
    if array.ndim == 2:
        array = array[:, :, None]
    return array


def writeImage(fileName, array):
    """ Write an H x W x C array in [0,1] as an 8-bit PNG. """
    array = np.asarray(array)
    if array.ndim == 3 and array.shape[2] == 1:
        array = array[:, :, 0]
    LOG.debug('Writing image '+fileName)
    Image.fromarray(np.round(np.clip(array, 0.0, 1.0) * 255.0).astype(np.uint8)).save(fileName)


def readLabelMap(fileName, colourMap=None):
    """ Read a label map.

    Paletted and grey-scale files hold the labels directly. RGB files are
    decoded with ``colourMap`` (list of colours indexed by label); binary
    masks stored as 0/255 grey-scale are mapped to 0/1.

    :rtype: numpy.ndarray
    """
    _checkExists(fileName)
    LOG.debug('Reading label map '+fileName)
    with Image.open(fileName) as image:
        mode = image.mode
        if mode in ('RGB', 'RGBA'):
            if colourMap is None:
                raise BadArguments('Error: RGB label map '+fileName+' needs a colour map.\n')
            return colourToIndex(np.asarray(image.convert('RGB')), colourMap, fileName)
        labels = np.asarray(image.convert('L') if mode not in ('P', 'L') else image).astype(np.uint8)
    if mode == 'L' and labels.max() == 255 and np.isin(labels, (0, 255)).all():
        labels = (labels // 255).astype(np.uint8)
    return labels


def colourToIndex(rgb, colourMap, fileName=''):
    """ Convert an RGB label image to indices of ``colourMap``. """
    rgb = np.asarray(rgb)
    labels = np.full(rgb.shape[:2], -1, dtype=np.int64)
    for index, colour in enumerate(colourMap):
        labels[np.all(rgb == np.asarray(colour, dtype=rgb.dtype), axis=2)] = index
    if (labels < 0).any():
        raise BadArguments('Error: label image '+fileName+' holds colours outside the colour map.\n')
    return labels.astype(np.uint8)


def writeLabelMap(fileName, labels, palette=LABEL_PALETTE):
    """ Write a label map as a paletted PNG. """
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() > 255):
        raise BadArguments('Error: labels outside [0, 255] cannot be written to '+fileName+'.\n')
    labels = np.ascontiguousarray(labels, dtype=np.uint8)
    image = Image.frombytes('P', (labels.shape[1], labels.shape[0]), labels.tobytes())
    flat = []
    for colour in palette:
        flat.extend(colour)
    image.putpalette(flat + [0] * (768 - len(flat)))
    LOG.debug('Writing label map '+fileName)
    image.save(fileName)


def writeChangeFigure(fileName, img1, img2, change, sem1=None, sem2=None, classNames=None, title=None):
    """ Side-by-side figure of both images, the change mask and the semantic maps if given.

    :arg str fileName: The desired filename of the PNG file.
    """
    import matplotlib
    matplotlib.use('Agg')
    import matplotlib.pyplot as plt
    from matplotlib.colors import ListedColormap
    panels = [(img1, 'T1', None), (img2, 'T2', None), (change, 'change', 'gray')]
    colours = ListedColormap(np.asarray(LABEL_PALETTE[:max(2, len(classNames or ()) + 1)]) / 255.0)
    if sem1 is not None:
        panels.append((sem1, 'semantic T1', colours))
        panels.append((sem2, 'semantic T2', colours))
    figure, axes = plt.subplots(1, len(panels), figsize=(3 * len(panels), 3.2))
    for axis, (array, label, colourMap) in zip(axes, panels):
        array = np.asarray(array)
        if array.ndim == 3 and array.shape[2] == 1:
            array = array[:, :, 0]
        if colourMap is None:
            axis.imshow(np.clip(array, 0.0, 1.0), cmap='gray' if array.ndim == 2 else None)
        elif isinstance(colourMap, str):
            axis.imshow(array, cmap='gray', vmin=0, vmax=1, interpolation='nearest')
        else:
            axis.imshow(array, cmap=colourMap, vmin=0, vmax=colourMap.N - 1, interpolation='nearest')
        axis.set_title(label)
        axis.axis('off')
    if title:
        figure.suptitle(title)
    LOG.info('Writing figure '+fileName)
    figure.savefig(fileName, format='png')
    plt.close(figure)

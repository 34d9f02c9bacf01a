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

'''Synthetic dual-temporal scenes of coloured shapes on textured noise.

Each shape family (square, circle, triangle) has its own geometry and colour.
A source decides, through its conflict map, which families are the positive
change class and which ones change without being labelled. Binary scenes are
drawn independently of which family is labelled, so one seed gives the same
images under any binary conflict map with the same number of labelled
families.
'''

import math
import logging
import dataclasses
from typing import Dict

import numpy as np
from matplotlib.path import Path

from unichange.data.changeTypes import (BadArguments, ClassVocabulary, GroundTruth, ImagePair, Sample,
                                        TaskKind, PYRAMID_STRIDE, binarizeSemanticChange)

LOG = logging.getLogger(__package__)

SHAPE_FAMILIES = ('square', 'circle', 'triangle')
FAMILY_COLOURS = {'square': (0.85, 0.22, 0.18),
                  'circle': (0.20, 0.78, 0.30),
                  'triangle': (0.22, 0.32, 0.88)}
_FILL_RATIO = {'square': 1.0, 'circle': math.pi / 4.0, 'triangle': 0.5}
_PLACEMENT_ATTEMPTS = 60


class Shape(object):
    """ A shape inscribed in the square box [top, top+size) x [left, left+size). """
    family = None

    def __init__(self, top, left, size):
        self.top = int(top)
        self.left = int(left)
        self.size = int(size)

    def outline(self):
        """ Closed polygon of (x, y) vertices in pixel-corner coordinates.

        :rtype: numpy.ndarray
        """
        raise NotImplementedError

    def box(self, margin=0):
        return (self.top - margin, self.left - margin, self.top + self.size + margin, self.left + self.size + margin)

    def mask(self, height, width):
        """ Pixels whose centre falls inside the outline.

        :returns: Boolean height x width array.
        """
        mask = np.zeros((height, width), dtype=bool)
        top, left, bottom, right = self.box()
        top, left = max(top, 0), max(left, 0)
        bottom, right = min(bottom, height), min(right, width)
        if bottom <= top or right <= left:
            return mask
        ys, xs = np.mgrid[top:bottom, left:right]
        centres = np.stack([xs.ravel() + 0.5, ys.ravel() + 0.5], axis=1)
        inside = Path(self.outline()).contains_points(centres)
        mask[top:bottom, left:right] = inside.reshape(bottom - top, right - left)
        return mask


class Square(Shape):
    family = 'square'

    def outline(self):
        top, left, bottom, right = self.box()
        return np.array([[left, top], [right, top], [right, bottom], [left, bottom], [left, top]], dtype=float)


class Circle(Shape):
    family = 'circle'

    def __init__(self, top, left, size, numbPoints=48):
        super(Circle, self).__init__(top, left, size)
        self.numbPoints = numbPoints

    def outline(self):
        radius = self.size / 2.0
        centreX = self.left + radius
        centreY = self.top + radius
        delta_alpha = 2.0 * np.pi / self.numbPoints
        coordsList = []
        for pointCounter in range(self.numbPoints):
            coordsList.append([centreX + np.sin(pointCounter * delta_alpha) * radius,
                               centreY + np.cos(pointCounter * delta_alpha) * radius])
        coordsList.append(coordsList[0])
        return np.array(coordsList)


class Triangle(Shape):
    family = 'triangle'

    def outline(self):
        top, left, bottom, right = self.box()
        return np.array([[(left + right) / 2.0, top], [right, bottom], [left, bottom], [(left + right) / 2.0, top]])


_SHAPE_CLASSES = {'square': Square, 'circle': Circle, 'triangle': Triangle}

def makeShape(family, top, left, size):
    try:
        return _SHAPE_CLASSES[family](top, left, size)
    except KeyError:
        raise BadArguments('Error: unknown shape family '+str(family)+', expected one of '+
                           ', '.join(SHAPE_FAMILIES)+'.\n')


@dataclasses.dataclass
class SyntheticSpec:
    """ Recipe of one synthetic source.

    ``conflict_map`` maps each shape family drawn in the scenes to True when
    its changes are labelled, False when they are explicit background.
    Binary sources label exactly one family unless ``generic_vocabulary`` is
    set; semantic sources label at least two, each family being one class.
    ``class_names`` optionally renames families in the vocabulary.
    """
    source_id: str = 'synthetic'
    task: str = 'bcd'
    image_size: int = 64
    conflict_map: Dict[str, bool] = dataclasses.field(default_factory=lambda: {'square': True, 'circle': False})
    class_names: Dict[str, str] = dataclasses.field(default_factory=dict)
    generic_vocabulary: bool = False
    change_rate: float = 0.1
    noise_level: float = 0.02
    static_shapes: int = 2
    shape_scale: float = 1.0
    snap: int = 1
    seed: int = 0
    count: int = 8

    def __post_init__(self):
        self.conflict_map = dict(self.conflict_map)
        self.class_names = dict(self.class_names)
        taskKind = TaskKind.fromString(self.task)
        if self.image_size <= 0 or self.image_size % PYRAMID_STRIDE != 0:
            raise BadArguments('Error: synthetic image size '+str(self.image_size)+' is not a positive multiple of '+
                               str(PYRAMID_STRIDE)+'.\n')
        if not 0.0 <= self.change_rate < 1.0:
            raise BadArguments('Error: change rate '+str(self.change_rate)+' outside [0, 1).\n')
        if self.noise_level < 0 or self.shape_scale <= 0 or self.snap < 1 or self.count < 0 or self.static_shapes < 0:
            raise BadArguments('Error: invalid synthetic source parameters for '+self.source_id+'.\n')
        for family in list(self.conflict_map) + list(self.class_names):
            if family not in SHAPE_FAMILIES:
                raise BadArguments('Error: unknown shape family '+str(family)+'.\n')
        positives = self.positiveFamilies()
        if taskKind == TaskKind.BCD and len(positives) != 1 and not (self.generic_vocabulary and positives):
            raise BadArguments('Error: binary source '+self.source_id+' must label exactly one shape family.\n')
        if taskKind == TaskKind.SCD and len(positives) < 2:
            raise BadArguments('Error: semantic source '+self.source_id+' needs at least two classes.\n')

    @property
    def taskKind(self):
        return TaskKind.fromString(self.task)

    def positiveFamilies(self):
        return [family for family, positive in self.conflict_map.items() if positive]

    def vocabulary(self):
        """ :rtype: ClassVocabulary """
        if self.taskKind == TaskKind.BCD and self.generic_vocabulary:
            return ClassVocabulary.generic()
        return ClassVocabulary(tuple(self.class_names.get(family, family) for family in self.positiveFamilies()))

    def sampleSeed(self, index):
        return self.seed + index

    def sizeRange(self):
        low = max(4, int(round(0.12 * self.image_size * self.shape_scale)))
        high = max(low, int(round(0.30 * self.image_size * self.shape_scale)))
        return low, high


@dataclasses.dataclass
class SceneObject:
    """ A shape box with the family drawn at each time (None when absent). """
    shape1: object
    shape2: object
    static: bool

    def familyAt(self, time):
        shape = self.shape1 if time == 1 else self.shape2
        return None if shape is None else shape.family


@dataclasses.dataclass
class Scene:
    img1: np.ndarray
    img2: np.ndarray
    objects: list
    size: int


def _snapDown(value, snap):
    return (int(value) // snap) * snap


def _background(rng, size):
    cells = size // 8 + 1
    coarse = rng.uniform(0.30, 0.50, size=(cells, cells, 1)) + rng.uniform(-0.04, 0.04, size=(cells, cells, 3))
    texture = np.kron(coarse, np.ones((8, 8, 1)))[:size, :size]
    return np.clip(texture + rng.normal(0.0, 0.02, size=(size, size, 3)), 0.0, 1.0)


class _Placer(object):
    """ Non-overlapping placement of shape boxes, one pixel apart. """
    def __init__(self, spec, rng):
        self.spec = spec
        self.rng = rng
        self.size = spec.image_size
        self.occupied = np.zeros((self.size, self.size), dtype=bool)
        self.low, self.high = spec.sizeRange()

    def propose(self, fillRatio, wantedArea=None):
        """ Random snapped box; with ``wantedArea`` the side is capped so a shape of that fill ratio fits it. """
        side = self.rng.uniform(self.low, self.high)
        if wantedArea is not None:
            side = min(side, math.sqrt(max(wantedArea, 0.0) / fillRatio))
        snap = self.spec.snap
        side = max(self.low, side)
        side = max(snap, int(round(side / snap)) * snap)
        side = min(side, _snapDown(self.size, snap))
        top = _snapDown(self.rng.integers(0, self.size - side + 1), snap)
        left = _snapDown(self.rng.integers(0, self.size - side + 1), snap)
        return top, left, side

    def free(self, top, left, side):
        return not self.occupied[max(top - 1, 0):top + side + 1, max(left - 1, 0):left + side + 1].any()

    def take(self, top, left, side):
        self.occupied[top:top + side, left:left + side] = True

    def accepts(self, covered, area, target):
        """ True when adding ``area`` brings the covered area closer to ``target``. """
        return abs(covered + area - target) < abs(covered - target)


def _paint(image, shape, rng):
    if shape is None:
        return
    colour = np.asarray(FAMILY_COLOURS[shape.family]) + rng.uniform(-0.05, 0.05, size=3)
    image[shape.mask(image.shape[0], image.shape[1])] = np.clip(colour, 0.0, 1.0)


def _appearanceEvents(placer, rng, family, target):
    """ Shapes of one family that appear or vanish, until their area is as close as possible to ``target``. """
    events = []
    covered = 0.0
    size = placer.size
    for attempt in range(_PLACEMENT_ATTEMPTS):
        if target - covered <= 0:
            break
        top, left, side = placer.propose(_FILL_RATIO[family], target - covered)
        if not placer.free(top, left, side):
            continue
        shape = makeShape(family, top, left, side)
        area = float(shape.mask(size, size).sum())
        if not placer.accepts(covered, area, target):
            continue
        placer.take(top, left, side)
        covered += area
        if rng.random() < 0.5:
            events.append(SceneObject(shape, None, False))
        else:
            events.append(SceneObject(None, shape, False))
    return events


def _transitionEvents(placer, rng, families, target):
    """ Shapes replaced by another of ``families`` inside the same box.

    The union footprint of both shapes changes; the families are drawn per
    event and share one area target.
    """
    events = []
    covered = 0.0
    size = placer.size
    for attempt in range(_PLACEMENT_ATTEMPTS * len(families)):
        if target - covered <= 0:
            break
        family = families[int(rng.integers(0, len(families)))]
        others = [candidate for candidate in families if candidate != family]
        other = others[int(rng.integers(0, len(others)))]
        top, left, side = placer.propose(max(_FILL_RATIO[family], _FILL_RATIO[other]), target - covered)
        if not placer.free(top, left, side):
            continue
        shape = makeShape(family, top, left, side)
        replacement = makeShape(other, top, left, side)
        area = float((shape.mask(size, size) | replacement.mask(size, size)).sum())
        if not placer.accepts(covered, area, target):
            continue
        placer.take(top, left, side)
        covered += area
        events.append(SceneObject(shape, replacement, False))
    return events


def generateScene(spec, index):
    """ Draw scene ``index`` of a source.

    ``change_rate`` is the expected labelled fraction of the image. Binary
    sources draw appearance and disappearance events per family of the
    conflict map, each family aiming at ``change_rate`` divided by the number
    of labelled families, so flipping which family is labelled leaves the
    images alone. Semantic sources draw class transitions among the labelled
    families against one shared target, then let the other families appear
    or vanish. Static shapes are present at both times. Independent noise is
    added to each time.

    :rtype: Scene
    """
    rng = np.random.default_rng(spec.sampleSeed(index))
    size = spec.image_size
    placer = _Placer(spec, rng)
    objects = []
    target = spec.change_rate * size * size
    positives = spec.positiveFamilies()
    if spec.taskKind == TaskKind.SCD:
        objects.extend(_transitionEvents(placer, rng, positives, target))
        for family in spec.conflict_map:
            if family not in positives:
                objects.extend(_appearanceEvents(placer, rng, family, target))
    else:
        share = target / max(1, len(positives))
        for family in spec.conflict_map:
            objects.extend(_appearanceEvents(placer, rng, family, share))
    families = list(spec.conflict_map)
    for staticCount in range(spec.static_shapes):
        family = families[int(rng.integers(0, len(families)))]
        for attempt in range(_PLACEMENT_ATTEMPTS):
            top, left, side = placer.propose(_FILL_RATIO[family])
            if placer.free(top, left, side):
                placer.take(top, left, side)
                shape = makeShape(family, top, left, side)
                objects.append(SceneObject(shape, shape, True))
                break
    background = _background(rng, size)
    img1 = background.copy()
    img2 = background.copy()
    for sceneObject in objects:
        if sceneObject.static:
            colourSeed = int(rng.integers(0, 2 ** 31))
            _paint(img1, sceneObject.shape1, np.random.default_rng(colourSeed))
            _paint(img2, sceneObject.shape2, np.random.default_rng(colourSeed))
        else:
            _paint(img1, sceneObject.shape1, rng)
            _paint(img2, sceneObject.shape2, rng)
    img1 = np.clip(img1 + rng.normal(0.0, spec.noise_level, size=img1.shape), 0.0, 1.0).astype(np.float32)
    img2 = np.clip(img2 + rng.normal(0.0, spec.noise_level, size=img2.shape), 0.0, 1.0).astype(np.float32)
    return Scene(img1, img2, objects, size)


def labelScene(scene, conflictMap):
    """ Binary change mask of a scene under a conflict map.

    Only events of families mapped to True are marked.

    :rtype: numpy.ndarray
    """
    change = np.zeros((scene.size, scene.size), dtype=bool)
    for sceneObject in scene.objects:
        if sceneObject.static:
            continue
        for shape in (sceneObject.shape1, sceneObject.shape2):
            if shape is not None and conflictMap.get(shape.family, False):
                change |= shape.mask(scene.size, scene.size)
    return change.astype(np.uint8)


def semanticLabels(scene, classFamilies):
    """ Semantic label maps of both times; family classFamilies[k] has label k+1.

    Each time is labelled with the shape it shows. A class transition
    therefore changes every pixel of the union footprint, and the part of
    the footprint outside the shape of one time is background (label 0) at
    that time. Families outside the list are background as well.

    :returns: (sem_t1, sem_t2) uint8 arrays.
    """
    labels = dict((family, index + 1) for index, family in enumerate(classFamilies))
    sem1 = np.zeros((scene.size, scene.size), dtype=np.uint8)
    sem2 = np.zeros((scene.size, scene.size), dtype=np.uint8)
    for sceneObject in scene.objects:
        first = sceneObject.familyAt(1)
        second = sceneObject.familyAt(2)
        if first in labels:
            sem1[sceneObject.shape1.mask(scene.size, scene.size)] = labels[first]
        if second in labels:
            sem2[sceneObject.shape2.mask(scene.size, scene.size)] = labels[second]
    return sem1, sem2


def generateBcdSource(spec):
    """ Binary samples of a synthetic source.

    :arg SyntheticSpec spec: The source recipe.
    :rtype: list
    """
    if spec.taskKind != TaskKind.BCD:
        raise BadArguments('Error: source '+spec.source_id+' is not a binary source.\n')
    vocabulary = spec.vocabulary()
    samples = []
    for index in range(spec.count):
        scene = generateScene(spec, index)
        change = labelScene(scene, spec.conflict_map)
        samples.append(Sample(ImagePair(scene.img1, scene.img2), GroundTruth(change), spec.source_id, vocabulary))
    LOG.info('Generated '+str(len(samples))+' binary samples for source '+spec.source_id)
    return samples


def generateScdSource(spec):
    """ Semantic samples of a synthetic source; the change mask is derived from the label maps.

    :rtype: list
    """
    if spec.taskKind != TaskKind.SCD:
        raise BadArguments('Error: source '+spec.source_id+' is not a semantic source.\n')
    vocabulary = spec.vocabulary()
    classFamilies = spec.positiveFamilies()
    samples = []
    for index in range(spec.count):
        scene = generateScene(spec, index)
        sem1, sem2 = semanticLabels(scene, classFamilies)
        change = binarizeSemanticChange(sem1, sem2)
        samples.append(Sample(ImagePair(scene.img1, scene.img2), GroundTruth(change, sem1, sem2),
                              spec.source_id, vocabulary))
    LOG.info('Generated '+str(len(samples))+' semantic samples for source '+spec.source_id)
    return samples


def generateSource(spec):
    if spec.taskKind == TaskKind.SCD:
        return generateScdSource(spec)
    return generateBcdSource(spec)

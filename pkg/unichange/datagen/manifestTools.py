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

'''Dataset manifests.

A manifest names a source, its task kind and class vocabulary, and lists per
split the files of every sample, relative to the manifest's directory. Sample
files are laid out as ``<root>/<split>/<idx>_{t1,t2,change,sem1,sem2}.png``
with label maps stored as paletted PNG files. This module also tiles large
scenes, splits them, and indexes the directory layouts of public change
detection datasets.
'''

import os
import json
import logging
import dataclasses
from typing import Optional

import numpy as np

from unichange.data.changeTypes import (BadArguments, ClassVocabulary, GroundTruth, ImagePair, Sample,
                                        TaskKind, validateSample)
from unichange.datagen.rasterTools import (readImage, writeImage, readLabelMap, writeLabelMap,
                                           SECOND_COLOUR_MAP, SECOND_CLASS_NAMES)

LOG = logging.getLogger(__package__)

MANIFEST_SCHEMA = 1
MANIFEST_FILE_NAME = 'manifest.json'
SPLITS = ('train', 'val', 'test')


class ManifestError(BadArguments):
    """ Missing files, malformed manifests and out-of-range labels. """
    pass


@dataclasses.dataclass(frozen=True)
class ManifestRecord:
    """ File names of one sample, relative to the manifest root.

    Semantic records may omit the change mask; it is then derived as the
    pixels labelled non-zero at either time.
    """
    t1: str
    t2: str
    change: Optional[str] = None
    sem1: Optional[str] = None
    sem2: Optional[str] = None

    def paths(self):
        return [path for path in (self.t1, self.t2, self.change, self.sem1, self.sem2) if path is not None]

    def toDict(self):
        return dict((key, value) for key, value in dataclasses.asdict(self).items() if value is not None)


class DatasetManifest(object):
    """ Files and metadata of one source.

    :arg str source_id: Source name.
    :arg task: TaskKind of the source.
    :arg ClassVocabulary vocabulary: Change classes.
    :arg dict splits: Split name to list of ManifestRecord.
    :arg int seed: Seed used to build the splits.
    :arg str root: Directory the record paths are relative to.
    :arg list colour_map: Optional colour map of RGB label files.
    """
    def __init__(self, source_id, task, vocabulary, splits, seed=0, root='.', colour_map=None):
        self.source_id = source_id
        self.task = task if isinstance(task, TaskKind) else TaskKind.fromString(task)
        self.vocabulary = vocabulary
        self.splits = dict((name, list(records)) for name, records in splits.items())
        self.seed = seed
        self.root = root
        self.colour_map = colour_map
        self._cache = {}

    def __eq__(self, other):
        return (isinstance(other, DatasetManifest) and self.source_id == other.source_id and
                self.task == other.task and self.vocabulary == other.vocabulary and
                self.splits == other.splits and self.seed == other.seed)

    @property
    def sourceId(self):
        return self.source_id

    def splitSize(self, split):
        return len(self.splits.get(split, []))

    def resolve(self, path):
        return os.path.join(self.root, path)

    def checkFiles(self):
        """ Raise ManifestError naming the first referenced file that does not exist. """
        for split, records in self.splits.items():
            for record in records:
                for path in record.paths():
                    if not os.path.isfile(self.resolve(path)):
                        raise ManifestError('Error: file '+self.resolve(path)+' of split '+split+
                                            ' in manifest of source '+self.source_id+' does not exist.\n')

    def checkDisjoint(self):
        seen = {}
        for split, records in self.splits.items():
            for record in records:
                if record.t1 in seen and seen[record.t1] != split:
                    raise ManifestError('Error: sample '+record.t1+' appears in splits '+seen[record.t1]+
                                        ' and '+split+'.\n')
                seen[record.t1] = split

    def _readLabels(self, path):
        labels = readLabelMap(self.resolve(path), self.colour_map)
        if labels.size and int(labels.max()) > self.vocabulary.size:
            raise ManifestError('Error: label '+str(int(labels.max()))+' in '+self.resolve(path)+
                                ' exceeds the '+str(self.vocabulary.size)+' classes of source '+self.source_id+'.\n')
        return labels

    def loadSample(self, split, index):
        """ Read one sample from disk; samples are cached after the first read.

        :rtype: Sample
        """
        key = (split, index)
        if key in self._cache:
            return self._cache[key]
        try:
            record = self.splits[split][index]
        except (KeyError, IndexError):
            raise ManifestError('Error: source '+self.source_id+' has no sample '+str(index)+' in split '+
                                str(split)+'.\n')
        pair = ImagePair(readImage(self.resolve(record.t1)), readImage(self.resolve(record.t2)))
        sem1 = sem2 = None
        if record.sem1 is not None or record.sem2 is not None:
            sem1 = self._readLabels(record.sem1)
            sem2 = self._readLabels(record.sem2)
        if record.change is not None:
            change = readLabelMap(self.resolve(record.change))
            if change.size and int(change.max()) > 1:
                raise ManifestError('Error: change mask '+self.resolve(record.change)+' is not binary.\n')
        else:
            change = ((sem1 != 0) | (sem2 != 0)).astype(np.uint8)
        sample = Sample(pair, GroundTruth(change, sem1, sem2), self.source_id, self.vocabulary)
        violations = validateSample(sample)
        if violations:
            LOG.warning('Sample '+record.t1+' of source '+self.source_id+': '+'; '.join(violations))
        self._cache[key] = sample
        return sample

    def samples(self, split):
        return [self.loadSample(split, index) for index in range(self.splitSize(split))]

    def toDict(self):
        manifest = {'schema': MANIFEST_SCHEMA,
                    'source_id': self.source_id,
                    'task': self.task.value,
                    'vocabulary': self.vocabulary.asList(),
                    'seed': self.seed,
                    'splits': dict((name, [record.toDict() for record in records])
                                   for name, records in self.splits.items())}
        if self.colour_map is not None:
            manifest['colour_map'] = [list(colour) for colour in self.colour_map]
        return manifest


class SampleSource(object):
    """ In-memory source with the sample interface of DatasetManifest. """
    def __init__(self, source_id, splits, vocabulary=None, task=None):
        if not isinstance(splits, dict):
            splits = {'train': list(splits)}
        self.splits = dict((name, list(samples)) for name, samples in splits.items())
        first = next((samples[0] for samples in self.splits.values() if samples), None)
        if first is None and (vocabulary is None or task is None):
            raise BadArguments('Error: empty in-memory source '+source_id+' needs a vocabulary and a task.\n')
        self.source_id = source_id
        self.vocabulary = vocabulary if vocabulary is not None else first.vocabulary
        self.task = task if task is not None else first.task

    @property
    def sourceId(self):
        return self.source_id

    def splitSize(self, split):
        return len(self.splits.get(split, []))

    def loadSample(self, split, index):
        return self.splits[split][index]

    def samples(self, split):
        return list(self.splits.get(split, []))


def _parseRecord(entry, path):
    try:
        return ManifestRecord(**entry)
    except TypeError:
        raise ManifestError('Error: malformed sample record '+str(entry)+' in manifest '+path+'.\n')


def saveManifest(manifest, path):
    """ Write a manifest as JSON. The manifest root becomes the file's directory. """
    LOG.info('Writing manifest of source '+manifest.source_id+' to '+path)
    directory = os.path.dirname(os.path.abspath(path))
    if os.path.abspath(manifest.root) != directory:
        raise ManifestError('Error: manifest of root '+manifest.root+' cannot be saved in '+directory+'.\n')
    with open(path, 'w') as manifestFile:
        json.dump(manifest.toDict(), manifestFile, indent=1)


def loadManifest(path, checkFiles=True):
    """ Read a manifest and check that every referenced file exists.

    :raises: ManifestError for missing files, malformed JSON or schema errors.
    :rtype: DatasetManifest
    """
    if not os.path.isfile(path):
        raise ManifestError('Error: manifest file '+path+' does not exist.\n')
    LOG.info('Reading manifest '+path)
    with open(path, 'r') as manifestFile:
        try:
            content = json.load(manifestFile)
        except ValueError as error:
            raise ManifestError('Error: manifest '+path+' is not valid JSON ('+str(error)+').\n')
    if not isinstance(content, dict) or content.get('schema') != MANIFEST_SCHEMA:
        raise ManifestError('Error: manifest '+path+' does not follow schema '+str(MANIFEST_SCHEMA)+'.\n')
    try:
        splits = dict((name, [_parseRecord(entry, path) for entry in records])
                      for name, records in content['splits'].items())
        manifest = DatasetManifest(content['source_id'], content['task'], ClassVocabulary(tuple(content['vocabulary'])),
                                   splits, content.get('seed', 0), os.path.dirname(os.path.abspath(path)),
                                   content.get('colour_map'))
    except (KeyError, AttributeError) as error:
        raise ManifestError('Error: manifest '+path+' misses field '+str(error)+'.\n')
    manifest.checkDisjoint()
    if checkFiles:
        manifest.checkFiles()
    return manifest


def writeSamples(root, source_id, splitSamples, seed=0):
    """ Write samples in the manifest layout and save ``<root>/manifest.json``.

    :arg str root: Output directory.
    :arg str source_id: Source name.
    :arg dict splitSamples: Split name to list of Sample.
    :rtype: DatasetManifest
    """
    vocabulary = None
    task = None
    splits = {}
    for split, samples in splitSamples.items():
        directory = os.path.join(root, split)
        if not os.path.isdir(directory):
            os.makedirs(directory)
        records = []
        for index, sample in enumerate(samples):
            vocabulary = sample.vocabulary
            task = sample.task
            names = dict((suffix, os.path.join(split, '%05d_%s.png' % (index, suffix)))
                         for suffix in ('t1', 't2', 'change', 'sem1', 'sem2'))
            writeImage(os.path.join(root, names['t1']), sample.pair.img1)
            writeImage(os.path.join(root, names['t2']), sample.pair.img2)
            writeLabelMap(os.path.join(root, names['change']), sample.gt.change_mask)
            if sample.gt.isSemantic():
                writeLabelMap(os.path.join(root, names['sem1']), sample.gt.sem_t1)
                writeLabelMap(os.path.join(root, names['sem2']), sample.gt.sem_t2)
                records.append(ManifestRecord(names['t1'], names['t2'], names['change'], names['sem1'], names['sem2']))
            else:
                records.append(ManifestRecord(names['t1'], names['t2'], names['change']))
        splits[split] = records
        LOG.info('Wrote '+str(len(records))+' samples of source '+source_id+' to '+directory)
    if vocabulary is None:
        raise BadArguments('Error: no samples to write for source '+source_id+'.\n')
    manifest = DatasetManifest(source_id, task, vocabulary, splits, seed, os.path.abspath(root))
    saveManifest(manifest, os.path.join(root, MANIFEST_FILE_NAME))
    return manifest


def splitIndices(count, ratios=(8, 1, 1), seed=0):
    """ Seeded shuffle of range(count), split contiguously into train, val and test.

    val and test take floor(count * ratio / sum(ratios)) items; train takes the rest.

    :rtype: dict
    """
    if len(ratios) != 3 or min(ratios) < 0 or sum(ratios) <= 0:
        raise BadArguments('Error: split ratios must be three non-negative numbers, got '+str(ratios)+'.\n')
    total = float(sum(ratios))
    permutation = np.random.default_rng(seed).permutation(count)
    numbVal = int(np.floor(count * ratios[1] / total))
    numbTest = int(np.floor(count * ratios[2] / total))
    numbTrain = count - numbVal - numbTest
    return {'train': [int(i) for i in permutation[:numbTrain]],
            'val': [int(i) for i in permutation[numbTrain:numbTrain + numbVal]],
            'test': [int(i) for i in permutation[numbTrain + numbVal:]]}


def splitSamples(samples, ratios=(8, 1, 1), seed=0):
    indices = splitIndices(len(samples), ratios, seed)
    return dict((split, [samples[i] for i in positions]) for split, positions in indices.items())


def tileGrid(height, width, tile):
    """ Row-major (top, left) corners of the whole tiles; edge remainders are dropped.

    :raises: BadArguments if the tile is larger than the image.
    :rtype: list
    """
    if tile <= 0 or tile > height or tile > width:
        raise BadArguments('Error: tile size '+str(tile)+' does not fit in a '+str(height)+'x'+str(width)+' image.\n')
    return [(top * tile, left * tile) for top in range(height // tile) for left in range(width // tile)]


def tilePair(img1, img2, masks, tile, ratios=(8, 1, 1), root='.', source_id='tiles', vocabulary=None, seed=0):
    """ Tile a large image pair, split the tiles and write them with a manifest.

    :arg img1: H x W x C first image in [0,1]; img2 likewise.
    :arg masks: GroundTruth of the whole scene.
    :arg int tile: Tile side.
    :arg tuple ratios: train, val, test proportions.
    :rtype: DatasetManifest
    """
    img1 = np.asarray(img1)
    img2 = np.asarray(img2)
    if img1.shape != img2.shape:
        raise BadArguments('Error: images to tile have different shapes.\n')
    vocabulary = vocabulary if vocabulary is not None else ClassVocabulary(('building',))
    corners = tileGrid(img1.shape[0], img1.shape[1], tile)
    LOG.info('Cutting '+str(len(corners))+' tiles of size '+str(tile)+' for source '+source_id)
    def crop(array, top, left):
        return None if array is None else np.asarray(array)[top:top + tile, left:left + tile]
    samples = []
    for top, left in corners:
        gt = GroundTruth(crop(masks.change_mask, top, left), crop(masks.sem_t1, top, left),
                         crop(masks.sem_t2, top, left))
        samples.append(Sample(ImagePair(crop(img1, top, left), crop(img2, top, left)), gt, source_id, vocabulary))
    return writeSamples(root, source_id, splitSamples(samples, ratios, seed), seed)


# Directory conventions of public datasets. Each split directory holds one
# folder per role; files are matched by name across folders.

class LEVIRCDPLUS:
    name = "LEVIR-CD+"
    source_id = "levir-cd-plus"
    task = "bcd"
    folders = {'t1': 'A', 't2': 'B', 'change': 'label'}
    classes = ('building',)
    colour_map = None

class S2LOOKING:
    name = "S2Looking"
    source_id = "s2looking"
    task = "bcd"
    folders = {'t1': 'Image1', 't2': 'Image2', 'change': 'label'}
    classes = ('building',)
    colour_map = None

class SECOND:
    name = "SECOND"
    source_id = "second"
    task = "scd"
    folders = {'t1': 'im1', 't2': 'im2', 'sem1': 'label1', 'sem2': 'label2'}
    classes = SECOND_CLASS_NAMES
    colour_map = SECOND_COLOUR_MAP

DATASET_LAYOUTS = {'levir-cd-plus': LEVIRCDPLUS, 's2looking': S2LOOKING, 'second': SECOND}


def indexDatasetDirectory(datasetRoot, layout, seed=0):
    """ Build a manifest over a dataset laid out as ``<datasetRoot>/<split>/<folder>/<file>``.

    Only splits present on disk are indexed. The manifest is returned, not
    written, since the dataset directory is left untouched.

    :arg str datasetRoot: Dataset directory.
    :arg layout: One of the DATASET_LAYOUTS entries.
    :rtype: DatasetManifest
    """
    if not os.path.isdir(datasetRoot):
        raise ManifestError('Error: dataset directory '+datasetRoot+' does not exist.\n')
    splits = {}
    for split in SPLITS:
        firstFolder = os.path.join(datasetRoot, split, layout.folders['t1'])
        if not os.path.isdir(firstFolder):
            continue
        records = []
        for fileName in sorted(os.listdir(firstFolder)):
            if not fileName.lower().endswith(('.png', '.tif', '.tiff', '.jpg')):
                continue
            roles = dict((role, os.path.join(split, folder, fileName)) for role, folder in layout.folders.items())
            records.append(ManifestRecord(**roles))
        splits[split] = records
        LOG.info('Indexed '+str(len(records))+' '+layout.name+' samples in split '+split)
    if not splits:
        raise ManifestError('Error: no '+layout.name+' split found under '+datasetRoot+'.\n')
    manifest = DatasetManifest(layout.source_id, layout.task, ClassVocabulary(tuple(layout.classes)), splits, seed,
                               os.path.abspath(datasetRoot), layout.colour_map)
    manifest.checkFiles()
    return manifest


def ingestWhuCd(beforePath, afterPath, labelPath, root, tile=1024, ratios=(8, 1, 1), seed=0):
    """ Tile the single large WHU-CD scene into a manifest of ``tile`` x ``tile`` samples. """
    change = readLabelMap(labelPath)
    return tilePair(readImage(beforePath), readImage(afterPath), GroundTruth(change), tile, ratios, root,
                    'whu-cd', ClassVocabulary(('building',)), seed)

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

'''Shared domain types of unichange.

Image pairs, ground truth, class vocabularies, task queries and mask bundles.
Images are kept as H x W x C numpy arrays with values in [0,1]; label maps are
H x W integer arrays where index 0 is the unchanged/background class and
indices 1..N are the change classes of the vocabulary.
'''

import enum
import re
import logging
import dataclasses
from typing import Optional, Tuple

import numpy as np

LOG = logging.getLogger(__package__)

BACKGROUND_NAME = "nochange"
GENERIC_CHANGE_NAME = "change"
PYRAMID_STRIDE = 32
MAX_CHANNELS = 4

_CLASS_NAME = re.compile(r"^[a-z0-9][a-z0-9 _\-]*$")


class BadArguments(Exception):
    """ A class used to raise exceptions for bad arguments. """
    def __init__(self, message):
        self.message = message
    def __str__(self):
        return self.message


class TaskKind(enum.Enum):
    """ Binary (BCD) or semantic (SCD) change detection. """
    BCD = "bcd"
    SCD = "scd"

    @classmethod
    def fromString(cls, name):
        try:
            return cls(str(name).lower())
        except ValueError:
            raise BadArguments('Error: unknown task kind '+str(name)+', expected bcd or scd.\n')


def _readOnly(array, dtype=None):
    if array is None:
        return None
    array = np.array(array, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


@dataclasses.dataclass(frozen=True)
class ClassVocabulary:
    """ Ordered change-class names.

    The background class is implicit: label 0 of every semantic map is
    ``nochange`` and class ``names[k]`` is label ``k+1``.
    """
    names: Tuple[str, ...] = ()

    def __post_init__(self):
        names = tuple(self.names)
        object.__setattr__(self, 'names', names)
        if len(set(names)) != len(names):
            raise BadArguments('Error: class names must be unique, got '+str(list(names))+'.\n')
        for name in names:
            if not isinstance(name, str) or _CLASS_NAME.match(name) is None:
                raise BadArguments('Error: class name '+repr(name)+' must be a non-empty lowercase word.\n')
            if name == BACKGROUND_NAME:
                raise BadArguments('Error: '+BACKGROUND_NAME+' is reserved for label 0.\n')

    @classmethod
    def generic(cls):
        """ The single-class vocabulary of binary change detection without class names. """
        return cls((GENERIC_CHANGE_NAME,))

    @property
    def size(self):
        """ Number of change classes N (background excluded). """
        return len(self.names)

    def isGeneric(self):
        return self.names == (GENERIC_CHANGE_NAME,)

    def labelNames(self):
        """ Names indexed by label value, background first.

        :rtype: tuple
        """
        return (BACKGROUND_NAME,) + self.names

    def asList(self):
        return list(self.names)


@dataclasses.dataclass(frozen=True)
class ImagePair:
    """ Dual-temporal images, both H x W x C with values in [0,1]. """
    img1: np.ndarray
    img2: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'img1', _readOnly(self.img1, np.float32))
        object.__setattr__(self, 'img2', _readOnly(self.img2, np.float32))

    @property
    def height(self):
        return self.img1.shape[0]

    @property
    def width(self):
        return self.img1.shape[1]

    @property
    def channels(self):
        return self.img1.shape[2] if self.img1.ndim == 3 else 1

    def swapped(self):
        return ImagePair(self.img2, self.img1)


@dataclasses.dataclass(frozen=True)
class GroundTruth:
    """ Change mask plus optional per-temporal semantic label maps.

    Holds numpy arrays for single samples. The harness also uses it for
    batched torch tensors (B x H x W); no copy is made in that case.
    """
    change_mask: object
    sem_t1: Optional[object] = None
    sem_t2: Optional[object] = None

    def __post_init__(self):
        for field in ('change_mask', 'sem_t1', 'sem_t2'):
            value = getattr(self, field)
            if isinstance(value, (np.ndarray, list)):
                object.__setattr__(self, field, _readOnly(value))

    def isSemantic(self):
        return self.sem_t1 is not None and self.sem_t2 is not None


@dataclasses.dataclass(frozen=True)
class Sample:
    """ One annotated image pair of a named source. """
    pair: ImagePair
    gt: GroundTruth
    source_id: str
    vocabulary: ClassVocabulary

    @property
    def task(self):
        return TaskKind.SCD if self.gt.isSemantic() else TaskKind.BCD


@dataclasses.dataclass(frozen=True)
class TaskQuery:
    """ Instruction text, task kind and the class vocabulary it refers to. """
    task: TaskKind
    instruction: str
    vocabulary: ClassVocabulary

    def __post_init__(self):
        if not isinstance(self.task, TaskKind):
            object.__setattr__(self, 'task', TaskKind.fromString(self.task))
        if not self.instruction or not self.instruction.strip():
            raise BadArguments('Error: task query instruction is empty.\n')
        if self.task == TaskKind.SCD and self.vocabulary.size < 1:
            raise BadArguments('Error: semantic change queries need at least one class name.\n')
        if self.task == TaskKind.BCD and self.vocabulary.size != 1:
            raise BadArguments('Error: binary change queries take exactly one class name, got '+
                               str(self.vocabulary.asList())+'.\n')

    @property
    def numClasses(self):
        """ Channel count C = N+1 of the semantic logits. """
        return self.vocabulary.size + 1


@dataclasses.dataclass(frozen=True)
class MaskBundle:
    """ Predicted logits.

    ``change_logits`` is H x W (B x H x W in batched form); the semantic
    logits are C x H x W (B x C x H x W) and exist only for semantic queries.
    """
    change_logits: object
    t1_logits: Optional[object] = None
    t2_logits: Optional[object] = None

    def isSemantic(self):
        return self.t1_logits is not None

    def violations(self):
        """ List broken invariants (finiteness, pairing of the semantic logits). """
        messages = []
        if (self.t1_logits is None) != (self.t2_logits is None):
            messages.append("semantic logits must be paired")
        for logits in (self.change_logits, self.t1_logits, self.t2_logits):
            if logits is not None and not np.all(np.isfinite(_asNumpy(logits))):
                messages.append("logits must be finite")
                break
        return messages

    def asNumpy(self, index=None):
        """ Copy the bundle to numpy, optionally selecting one batch element. """
        def pick(value):
            if value is None:
                return None
            value = _asNumpy(value)
            return value if index is None else value[index]
        return MaskBundle(pick(self.change_logits), pick(self.t1_logits), pick(self.t2_logits))


def _asNumpy(value):
    if hasattr(value, 'detach'):
        return value.detach().cpu().numpy()
    return np.asarray(value)


def binarizeSemanticChange(sem_t1, sem_t2):
    """ Binary change mask from a pair of semantic label maps.

    :arg sem_t1: H x W label map at the first time.
    :arg sem_t2: H x W label map at the second time.
    :returns: uint8 array, 1 where the labels differ.
    :rtype: numpy.ndarray
    :raises: BadArguments on shape mismatch.
    """
    sem_t1 = np.asarray(sem_t1)
    sem_t2 = np.asarray(sem_t2)
    if sem_t1.shape != sem_t2.shape:
        raise BadArguments('Error: semantic maps have different shapes '+str(sem_t1.shape)+
                           ' and '+str(sem_t2.shape)+'.\n')
    return (sem_t1 != sem_t2).astype(np.uint8)


def validateSample(sample):
    """ Check a sample against the invariants of the domain types.

    Violations are returned, never raised, and the sample is not modified.

    :arg Sample sample: The sample to check.
    :returns: Violation messages, empty for a valid sample.
    :rtype: list
    """
    violations = []
    img1 = np.asarray(sample.pair.img1)
    img2 = np.asarray(sample.pair.img2)
    if img1.ndim != 3 or img2.ndim != 3:
        violations.append("images must be H x W x C arrays")
        return violations
    if img1.shape != img2.shape:
        violations.append("images must have identical shape")
    height, width, channels = img1.shape
    if height % PYRAMID_STRIDE != 0 or width % PYRAMID_STRIDE != 0:
        violations.append("height and width must be divisible by "+str(PYRAMID_STRIDE))
    if channels > MAX_CHANNELS or channels < 1:
        violations.append("images must have between 1 and "+str(MAX_CHANNELS)+" channels")
    if not (np.all(np.isfinite(img1)) and np.all(np.isfinite(img2))):
        violations.append("images must be finite")
    elif img1.min() < 0 or img1.max() > 1 or img2.min() < 0 or img2.max() > 1:
        violations.append("image values must lie in [0, 1]")

    gt = sample.gt
    change = np.asarray(gt.change_mask)
    if change.shape != (height, width):
        violations.append("change mask must match image size")
    elif not np.isin(change, (0, 1)).all():
        violations.append("change mask must be binary")

    vocabulary = sample.vocabulary
    if (gt.sem_t1 is None) != (gt.sem_t2 is None):
        violations.append("semantic maps must be paired")
    elif gt.isSemantic():
        sem_t1 = np.asarray(gt.sem_t1)
        sem_t2 = np.asarray(gt.sem_t2)
        if sem_t1.shape != (height, width) or sem_t2.shape != (height, width):
            violations.append("semantic maps must match image size")
        else:
            if (sem_t1.min() < 0 or sem_t2.min() < 0 or
                    sem_t1.max() > vocabulary.size or sem_t2.max() > vocabulary.size):
                violations.append("semantic labels must lie in [0, N]")
            if change.shape == sem_t1.shape and np.any((change == 0) & (sem_t1 != sem_t2)):
                violations.append("unchanged pixels must keep class")
    if gt.sem_t1 is None and gt.sem_t2 is None and vocabulary.size != 1:
        violations.append("binary samples must use a single-class vocabulary")
    if violations:
        LOG.debug('Sample of source '+str(sample.source_id)+' violates: '+'; '.join(violations))
    return violations

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

'''Joint-training batch sampling over several sources.'''

import math
import queue
import logging
import threading
import dataclasses
from typing import List

import numpy as np

from unichange.data.changeTypes import BadArguments

LOG = logging.getLogger(__package__)


@dataclasses.dataclass(frozen=True)
class SourceBatch:
    """ Sample indices of one batch; all of them come from one source. """
    source: int
    source_id: str
    indices: tuple


@dataclasses.dataclass
class LoadedBatch:
    source: int
    source_id: str
    samples: List


def _allocate(sizes, steps):
    """ Split ``steps`` batches over sources proportionally to ``sizes``, at least one each. """
    if steps < len(sizes):
        raise BadArguments('Error: '+str(steps)+' steps per epoch cannot visit '+str(len(sizes))+' sources.\n')
    total = float(sum(sizes))
    shares = [steps * size / total for size in sizes]
    counts = [max(1, int(math.floor(share))) for share in shares]
    order = sorted(range(len(sizes)), key=lambda i: counts[i] - shares[i])
    position = 0
    while sum(counts) < steps:
        counts[order[position % len(order)]] += 1
        position += 1
    while sum(counts) > steps:
        largest = int(np.argmax(counts))
        counts[largest] -= 1
    return counts


class MixedSampler(object):
    """ Seeded stream of single-source batches.

    By default an epoch holds ceil(n / batchSize) batches of every source,
    so every sample of every source is seen once per epoch. With
    ``stepsPerEpoch`` the epoch holds that many batches split over the
    sources proportionally to their sizes, each source getting at least one.
    Batch slots are shuffled, so sources interleave.

    :arg list sources: DatasetManifest or SampleSource objects.
    :arg int batchSize: Samples per batch.
    :arg int seed: Sampling seed.
    :arg str split: Split to draw from.
    :arg int stepsPerEpoch: Optional number of batches per epoch.
    """
    def __init__(self, sources, batchSize=1, seed=0, split='train', stepsPerEpoch=None):
        if not sources:
            raise BadArguments('Error: the sampler needs at least one source.\n')
        if batchSize < 1:
            raise BadArguments('Error: batch size must be positive, got '+str(batchSize)+'.\n')
        for source in sources:
            if source.splitSize(split) == 0:
                raise BadArguments('Error: source '+source.source_id+' has no samples in split '+split+'.\n')
        self.sources = list(sources)
        self.batchSize = batchSize
        self.seed = seed
        self.split = split
        self.stepsPerEpoch = stepsPerEpoch
        self.sizes = [source.splitSize(split) for source in self.sources]

    def batchesPerSource(self):
        if self.stepsPerEpoch is None:
            return [int(math.ceil(size / float(self.batchSize))) for size in self.sizes]
        return _allocate(self.sizes, self.stepsPerEpoch)

    def __len__(self):
        return sum(self.batchesPerSource())

    def epochPlan(self, epoch):
        """ Batches of one epoch, a pure function of (seed, epoch).

        :rtype: list of SourceBatch
        """
        rng = np.random.default_rng([self.seed, epoch])
        slots = []
        for position, (source, size, count) in enumerate(zip(self.sources, self.sizes, self.batchesPerSource())):
            if self.stepsPerEpoch is None:
                # One pass; the last batch holds the remainder only.
                order = rng.permutation(size)
            else:
                passes = int(math.ceil(count * self.batchSize / float(size)))
                order = np.concatenate([rng.permutation(size) for _ in range(passes)])
            for batch in range(count):
                indices = order[batch * self.batchSize:(batch + 1) * self.batchSize]
                slots.append(SourceBatch(position, source.source_id, tuple(int(i) for i in indices)))
        permutation = rng.permutation(len(slots))
        plan = [slots[i] for i in permutation]
        LOG.debug('Epoch '+str(epoch)+' plan: '+str(len(plan))+' batches over '+str(len(self.sources))+' sources')
        return plan

    def load(self, batch):
        source = self.sources[batch.source]
        return LoadedBatch(batch.source, batch.source_id, [source.loadSample(self.split, i) for i in batch.indices])

    def iterate(self, epoch, start=0):
        """ Loaded batches of one epoch, starting at plan position ``start``. """
        for batch in self.epochPlan(epoch)[start:]:
            yield self.load(batch)


_END = object()


class _Failure(object):
    def __init__(self, error):
        self.error = error


class PrefetchIterator(object):
    """ Iterate ``iterable`` on a worker thread through a bounded queue.

    Items come out in the order the worker produced them. An exception in
    the worker is raised again in the consumer. A capacity of 0 iterates
    in the calling thread.
    """
    def __init__(self, iterable, capacity=2, name='prefetch'):
        self.capacity = capacity
        self._iterator = iter(iterable)
        self._queue = None
        self._stop = threading.Event()
        if capacity > 0:
            self._queue = queue.Queue(maxsize=capacity)
            self._thread = threading.Thread(target=self._fill, name=name, daemon=True)
            self._thread.start()

    def _put(self, item):
        while not self._stop.is_set():
            try:
                self._queue.put(item, True, 0.1)
                return True
            except queue.Full:
                continue
        return False

    def _fill(self):
        try:
            for item in self._iterator:
                if not self._put(item):
                    return
        except Exception as error:
            self._put(_Failure(error))
            return
        self._put(_END)

    def __iter__(self):
        return self

    def __next__(self):
        if self._queue is None:
            return next(self._iterator)
        item = self._queue.get()
        if item is _END:
            self._queue.put(_END)
            raise StopIteration
        if isinstance(item, _Failure):
            raise item.error
        return item

    def close(self):
        self._stop.set()

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

'''Training configuration, the training loop and checkpoints.

One optimiser step accumulates the gradients of ``accumulation_steps``
single-source micro-batches, each loss scaled by the reciprocal of the
number of micro-batches in the step. Every step is logged with all loss
terms.
'''

import os
import json
import random
import logging
import dataclasses
from typing import List, Optional

import numpy as np
import torch

from unichange.config import provenance
from unichange.data.changeTypes import BadArguments, ClassVocabulary, GroundTruth, TaskKind
from unichange.text.instructionCodec import TokenVocabulary, makeTaskQuery, TEACHER_FORCED
from unichange.vision.visionEncoder import imageToTensor
from unichange.losses.changeLosses import LossWeights, SEMANTIC_SUPERVISION, maskLoss, totalLoss
from unichange.datagen.manifestTools import loadManifest
from unichange.datagen.sampler import MixedSampler, PrefetchIterator
from unichange.harness.model import UniChangeModel

LOG = logging.getLogger(__package__)

DTYPES = {'float32': torch.float32, 'float64': torch.float64}
CHECKPOINT_NAME = 'latest.pt'


class NonFiniteLossError(Exception):
    """ A loss term became NaN or infinite. """
    def __init__(self, message):
        self.message = message
    def __str__(self):
        return self.message


@dataclasses.dataclass
class TrainConfig:
    """ Training settings. Keys of configuration files are the field names. """
    learning_rate: float = 5e-5
    weight_decay: float = 0.0
    batch_size: int = 1
    accumulation_steps: int = 8
    epochs: int = 10
    steps_per_epoch: Optional[int] = None
    loss_weights: dict = dataclasses.field(default_factory=lambda: dataclasses.asdict(LossWeights()))
    seed: int = 0
    checkpoint_dir: str = "checkpoints"
    manifests: List[str] = dataclasses.field(default_factory=list)
    d_model: int = 64
    lm_width: int = 64
    backbone: str = "toy"
    freeze_backbone: bool = False
    semantic_supervision: str = "both"
    lm_warmup_steps: int = 0
    lm_warmup_learning_rate: float = 1e-3
    lm_rehearsal: bool = False
    dtype: str = "float32"
    prefetch: int = 0
    max_response_length: int = 16

    def __post_init__(self):
        for name in ('learning_rate', 'lm_warmup_learning_rate', 'batch_size', 'accumulation_steps', 'd_model',
                     'lm_width', 'max_response_length'):
            if getattr(self, name) <= 0:
                raise BadArguments('Error: configuration value '+name+' must be positive, got '+
                                   str(getattr(self, name))+'.\n')
        for name in ('weight_decay', 'epochs', 'lm_warmup_steps', 'prefetch'):
            if getattr(self, name) < 0:
                raise BadArguments('Error: configuration value '+name+' must not be negative, got '+
                                   str(getattr(self, name))+'.\n')
        if self.steps_per_epoch is not None and self.steps_per_epoch <= 0:
            raise BadArguments('Error: steps_per_epoch must be positive when given.\n')
        if self.semantic_supervision not in SEMANTIC_SUPERVISION:
            raise BadArguments('Error: semantic_supervision must be one of '+', '.join(SEMANTIC_SUPERVISION)+'.\n')
        if self.dtype not in DTYPES:
            raise BadArguments('Error: dtype must be one of '+', '.join(DTYPES)+', got '+str(self.dtype)+'.\n')
        weights = dataclasses.asdict(LossWeights())
        weights.update(self.loss_weights)
        self.loss_weights = dataclasses.asdict(LossWeights.fromDict(weights))

    @classmethod
    def fromDict(cls, settings):
        unknown = set(settings) - set(field.name for field in dataclasses.fields(cls))
        if unknown:
            raise BadArguments('Error: unknown configuration keys '+', '.join(sorted(unknown))+'.\n')
        return cls(**settings)

    def asDict(self):
        return dataclasses.asdict(self)

    def lossWeights(self):
        return LossWeights.fromDict(self.loss_weights)

    def torchDtype(self):
        return DTYPES[self.dtype]


def readSettingsFile(path):
    """ Read a TOML or JSON settings file, chosen by extension.

    :rtype: dict
    """
    if not os.path.isfile(path):
        raise BadArguments('Error: settings file '+path+' does not exist.\n')
    extension = os.path.splitext(path)[1].lower()
    if extension == '.toml':
        import tomllib
        with open(path, 'rb') as settingsFile:
            try:
                return tomllib.load(settingsFile)
            except tomllib.TOMLDecodeError as error:
                raise BadArguments('Error: settings file '+path+' is not valid TOML ('+str(error)+').\n')
    if extension == '.json':
        with open(path, 'r') as settingsFile:
            try:
                settings = json.load(settingsFile)
            except ValueError as error:
                raise BadArguments('Error: settings file '+path+' is not valid JSON ('+str(error)+').\n')
        if not isinstance(settings, dict):
            raise BadArguments('Error: settings file '+path+' must hold an object.\n')
        return settings
    raise BadArguments('Error: settings file '+path+' must end in .toml or .json.\n')


def loadTrainConfig(path):
    """ Read a TrainConfig from a TOML or JSON file.

    Relative manifest paths are taken relative to the configuration file.

    :rtype: TrainConfig
    """
    settings = readSettingsFile(path)
    directory = os.path.dirname(os.path.abspath(path))
    if 'manifests' in settings:
        settings['manifests'] = [manifest if os.path.isabs(manifest) else os.path.join(directory, manifest)
                                 for manifest in settings['manifests']]
    LOG.info('Read training configuration '+path)
    return TrainConfig.fromDict(settings)


def setAllSeeds(seed):
    random.seed(seed)
    np.random.seed(seed)
    torch.manual_seed(seed)


def collateSamples(samples, dtype=torch.float32):
    """ Stack samples into (B, C, H, W) image tensors and batched tensor annotations.

    :returns: images1, images2 and a GroundTruth of tensors.
    """
    if not samples:
        raise BadArguments('Error: cannot collate an empty batch.\n')
    semantic = samples[0].gt.isSemantic()
    if any(sample.gt.isSemantic() != semantic for sample in samples):
        raise BadArguments('Error: a batch mixes binary and semantic samples.\n')
    images1 = imageToTensor(np.stack([sample.pair.img1 for sample in samples]), dtype)
    images2 = imageToTensor(np.stack([sample.pair.img2 for sample in samples]), dtype)
    change = torch.from_numpy(np.stack([np.asarray(sample.gt.change_mask, dtype=np.float32) for sample in samples]))
    sem1 = sem2 = None
    if semantic:
        sem1 = torch.from_numpy(np.stack([np.asarray(sample.gt.sem_t1, dtype=np.int64) for sample in samples]))
        sem2 = torch.from_numpy(np.stack([np.asarray(sample.gt.sem_t2, dtype=np.int64) for sample in samples]))
    return images1, images2, GroundTruth(change.to(dtype), sem1, sem2)


def buildTokenVocabulary(sources):
    """ Token vocabulary covering the class names of every source. """
    names = []
    for source in sources:
        for name in source.vocabulary.names:
            if name not in names:
                names.append(name)
    return TokenVocabulary(tuple(names))


def loadModel(path, dtype=None):
    """ Rebuild a model from a checkpoint, in evaluation mode.

    :returns: the model and the checkpoint dictionary.
    """
    if not os.path.isfile(path):
        raise BadArguments('Error: checkpoint '+path+' does not exist.\n')
    LOG.info('Loading checkpoint '+path)
    checkpoint = torch.load(path, map_location='cpu', weights_only=False)
    model = UniChangeModel(TokenVocabulary.fromJson(checkpoint['token_vocabulary']), **checkpoint['model_settings'])
    model.load_state_dict(checkpoint['model'])
    model.to(dtype if dtype is not None else DTYPES[checkpoint['config']['dtype']])
    model.eval()
    return model, checkpoint


class Trainer(object):
    """ Owns the model, the optimiser and the sampler of one training run.

    :arg TrainConfig config: Settings.
    :arg list sources: DatasetManifest or SampleSource objects with a train split.
    :arg model: Optional model to train; built from the configuration if omitted.
    """
    def __init__(self, config, sources, model=None):
        if not sources:
            raise BadArguments('Error: training needs at least one source.\n')
        self.config = config
        self.sources = list(sources)
        self.dtype = config.torchDtype()
        setAllSeeds(config.seed)
        if model is None:
            channels = self.sources[0].loadSample('train', 0).pair.channels
            model = UniChangeModel(buildTokenVocabulary(self.sources), config.d_model, config.lm_width,
                                   config.backbone, channels, config.freeze_backbone)
        self.model = model.to(self.dtype)
        self.queries = [makeTaskQuery(source.task, source.vocabulary) for source in self.sources]
        for source, query in zip(self.sources, self.queries):
            LOG.info('Source '+source.source_id+' ('+source.task.value+'): '+query.instruction)
        self.sampler = MixedSampler(self.sources, config.batch_size, config.seed, 'train', config.steps_per_epoch)
        self.weights = config.lossWeights()
        self.optimizer = torch.optim.AdamW([parameter for parameter in self.model.parameters()
                                            if parameter.requires_grad],
                                           lr=config.learning_rate, weight_decay=config.weight_decay)
        self.step = 0
        self.epoch = 0
        self.position = 0
        self.warmedUp = False
        self.log = []

    @classmethod
    def fromConfig(cls, config):
        if not config.manifests:
            raise BadArguments('Error: the configuration names no manifests.\n')
        return cls(config, [loadManifest(path) for path in config.manifests])

    def stepsPerEpoch(self):
        """ Optimiser steps of one epoch. """
        return -(-len(self.sampler) // self.config.accumulation_steps)

    def warmupQueries(self):
        """ Every source query, plus a semantic query over the union of all class names. """
        queries = list(self.queries)
        names = []
        for query in self.queries:
            for name in query.vocabulary.names:
                if name not in names:
                    names.append(name)
        union = makeTaskQuery(TaskKind.SCD, ClassVocabulary(tuple(names)))
        if union not in queries:
            queries.append(union)
        return queries

    def warmupInstructions(self, steps=None):
        """ Train the language model alone on the response templates.

        :returns: list of the mean text loss of every warm-up step.
        """
        steps = self.config.lm_warmup_steps if steps is None else steps
        queries = self.warmupQueries()
        codec = self.model.codec
        optimizer = torch.optim.AdamW(codec.lm.parameters(), lr=self.config.lm_warmup_learning_rate,
                                      weight_decay=self.config.weight_decay)
        losses = []
        self.model.train()
        for step in range(steps):
            optimizer.zero_grad(set_to_none=True)
            loss = torch.stack([codec.lmLoss(query) for query in queries]).mean()
            if not torch.isfinite(loss):
                raise NonFiniteLossError('Error: loss term txt is not finite at warm-up step '+str(step)+'.\n')
            loss.backward()
            optimizer.step()
            losses.append(float(loss.detach()))
            LOG.debug('warm-up step '+str(step)+' txt '+'%.6f' % losses[-1])
        if steps:
            LOG.info('Instruction warm-up: '+str(steps)+' steps over '+str(len(queries))+' queries, final txt '+
                     '%.6f' % losses[-1])
        self.warmedUp = True
        return losses

    def microStep(self, batch):
        """ Forward pass and losses of one single-source batch. :rtype: LossReport """
        query = self.queries[batch.source]
        images1, images2, gt = collateSamples(batch.samples, self.dtype)
        output = self.model(images1, images2, query, TEACHER_FORCED)
        fragment = maskLoss(output.bundle, gt, output.streams, self.weights, query.task == TaskKind.SCD,
                            self.config.semantic_supervision)
        return totalLoss(output.txtLoss, fragment)

    def runStep(self, batches):
        """ One optimiser step over a group of micro-batches.

        :raises: NonFiniteLossError naming the first non-finite term.
        :returns: log entry of the step.
        """
        if not batches:
            raise BadArguments('Error: an optimiser step needs at least one micro-batch.\n')
        self.model.train()
        self.optimizer.zero_grad(set_to_none=True)
        sums = None
        gated = True
        for batch in batches:
            report = self.microStep(batch)
            # Components before the total, so the culprit is named.
            for name, value in sorted(report.terms().items(), key=lambda item: item[0] == 'total'):
                if not torch.isfinite(value):
                    raise NonFiniteLossError('Error: loss term '+name+' is not finite at step '+str(self.step)+
                                             ' (source '+batch.source_id+').\n')
            (report.total / len(batches)).backward()
            floats = report.asFloats()
            gated = gated and floats.pop('gated')
            sums = floats if sums is None else dict((name, sums[name] + floats[name]) for name in sums)
        rehearsal = 0.0
        if self.config.lm_rehearsal:
            loss = torch.stack([self.model.codec.lmLoss(query) for query in self.warmupQueries()]).mean()
            if not torch.isfinite(loss):
                raise NonFiniteLossError('Error: loss term rehearsal is not finite at step '+str(self.step)+'.\n')
            loss.backward()
            rehearsal = float(loss.detach())
        self.optimizer.step()
        entry = dict((name, value / len(batches)) for name, value in sums.items())
        entry['rehearsal'] = rehearsal
        entry.update(step=self.step, epoch=self.epoch, gated=gated, sources=[batch.source_id for batch in batches])
        LOG.info('step %d total %.6f txt %.6f bce %.6f dice %.6f ss %.6f sc %.6f gated %s' %
                 (self.step, entry['total'], entry['txt'], entry['bce'], entry['dice'], entry['ss'], entry['sc'],
                  gated))
        self.step += 1
        self.log.append(entry)
        return entry

    def train(self, maxSteps=None):
        """ Run the remaining epochs, or stop after ``maxSteps`` optimiser steps of this call.

        A checkpoint is written at the end of every epoch and when stopping
        early. With zero epochs the initial model is saved.

        :returns: the step log.
        """
        if self.config.epochs == 0:
            LOG.info('Zero epochs requested, saving the initial model.')
            self.saveCheckpoint()
            return self.log
        if self.config.lm_warmup_steps and not self.warmedUp and self.step == 0:
            self.warmupInstructions()
        taken = 0
        accumulation = self.config.accumulation_steps
        while self.epoch < self.config.epochs:
            LOG.info('Epoch '+str(self.epoch)+': '+str(self.stepsPerEpoch())+' optimiser steps')
            batches = PrefetchIterator(self.sampler.iterate(self.epoch, self.position), self.config.prefetch)
            group = []
            try:
                for batch in batches:
                    group.append(batch)
                    if len(group) < accumulation:
                        continue
                    self.runStep(group)
                    self.position += len(group)
                    group = []
                    taken += 1
                    if maxSteps is not None and taken >= maxSteps:
                        self.saveCheckpoint()
                        return self.log
                if group:
                    self.runStep(group)
                    taken += 1
            finally:
                batches.close()
            self.epoch += 1
            self.position = 0
            self.saveCheckpoint()
            if maxSteps is not None and taken >= maxSteps:
                break
        return self.log

    def checkpointState(self):
        return {'model': self.model.state_dict(),
                'optimizer': self.optimizer.state_dict(),
                'config': self.config.asDict(),
                'model_settings': dict(self.model.settings),
                'token_vocabulary': self.model.tokenVocabulary.toJson(),
                'step': self.step,
                'epoch': self.epoch,
                'position': self.position,
                'warmed_up': self.warmedUp,
                'rng': {'torch': torch.get_rng_state(), 'numpy': np.random.get_state(), 'python': random.getstate()},
                'sources': [{'source_id': source.source_id, 'task': source.task.value,
                             'vocabulary': source.vocabulary.asList()} for source in self.sources],
                'log': list(self.log),
                'provenance': provenance()}

    def saveCheckpoint(self, path=None):
        """ Write a checkpoint, by default ``<checkpoint_dir>/latest.pt``. :returns: the path. """
        if path is None:
            path = os.path.join(self.config.checkpoint_dir, CHECKPOINT_NAME)
        directory = os.path.dirname(os.path.abspath(path))
        if not os.path.isdir(directory):
            os.makedirs(directory)
        torch.save(self.checkpointState(), path)
        LOG.info('Wrote checkpoint '+path+' at step '+str(self.step))
        return path

    def resume(self, path):
        """ Restore parameters, optimiser state, counters, sampler position and RNG state. """
        if not os.path.isfile(path):
            raise BadArguments('Error: checkpoint '+path+' does not exist.\n')
        checkpoint = torch.load(path, map_location='cpu', weights_only=False)
        if checkpoint['token_vocabulary'] != self.model.tokenVocabulary.toJson():
            raise BadArguments('Error: checkpoint '+path+' was trained with a different token vocabulary.\n')
        self.model.load_state_dict(checkpoint['model'])
        self.optimizer.load_state_dict(checkpoint['optimizer'])
        self.step = checkpoint['step']
        self.epoch = checkpoint['epoch']
        self.position = checkpoint['position']
        self.warmedUp = checkpoint['warmed_up']
        self.log = list(checkpoint['log'])
        torch.set_rng_state(checkpoint['rng']['torch'])
        np.random.set_state(checkpoint['rng']['numpy'])
        random.setstate(checkpoint['rng']['python'])
        LOG.info('Resumed from '+path+' at epoch '+str(self.epoch)+', step '+str(self.step))

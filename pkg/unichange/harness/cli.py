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

'''Command line interface.

Exit codes: 0 on success, 2 on invalid arguments or data, 3 when training
stops on a non-finite loss.
'''

import os
import sys
import logging
import argparse

from unichange.config import setLogOutputFile, setLogLevel, LOG_LEVELS
from unichange.data.changeTypes import BadArguments
from unichange.text.instructionCodec import GENERATED, TEACHER_FORCED
from unichange.metrics.changeMetrics import formatReport, writeReport
from unichange.datagen.syntheticShapes import SyntheticSpec, generateSource
from unichange.datagen.manifestTools import loadManifest, splitSamples, writeSamples
from unichange.harness.trainer import NonFiniteLossError, Trainer, loadModel, loadTrainConfig, readSettingsFile
from unichange.harness.evaluation import evaluate, predict, queryFromArguments, scoreDirectories

LOG = logging.getLogger(__package__)

EXIT_SUCCESS = 0
EXIT_BAD_ARGUMENTS = 2
EXIT_NON_FINITE = 3


def generateDatasets(specPath, outDir):
    """ Generate every synthetic source of a gen-data file into ``<outDir>/<source_id>/``.

    Each entry of the ``sources`` list holds SyntheticSpec fields plus an
    optional ``ratios`` triple (default 8, 1, 1).

    :returns: list of the written manifest paths.
    """
    settings = readSettingsFile(specPath)
    entries = settings.get('sources')
    if not entries:
        raise BadArguments('Error: gen-data file '+specPath+' lists no sources.\n')
    unknown = set(settings) - {'sources'}
    if unknown:
        raise BadArguments('Error: unknown gen-data keys '+', '.join(sorted(unknown))+'.\n')
    paths = []
    for entry in entries:
        entry = dict(entry)
        ratios = tuple(entry.pop('ratios', (8, 1, 1)))
        try:
            spec = SyntheticSpec(**entry)
        except TypeError as error:
            raise BadArguments('Error: invalid synthetic source entry in '+specPath+' ('+str(error)+').\n')
        root = os.path.join(outDir, spec.source_id)
        manifest = writeSamples(root, spec.source_id, splitSamples(generateSource(spec), ratios, spec.seed), spec.seed)
        paths.append(os.path.join(manifest.root, 'manifest.json'))
    return paths


def runTrain(arguments):
    config = loadTrainConfig(arguments.config)
    if arguments.out is not None:
        config.checkpoint_dir = arguments.out
    trainer = Trainer.fromConfig(config)
    if arguments.resume is not None:
        trainer.resume(arguments.resume)
    trainer.train()
    trainer.saveCheckpoint()


def runEval(arguments):
    model, _ = loadModel(arguments.ckpt)
    report = evaluate(model, loadManifest(arguments.manifest), arguments.split, mode=arguments.mode)
    print(formatReport(report))
    if arguments.out is not None:
        writeReport(report, arguments.out)


def runPredict(arguments):
    model, _ = loadModel(arguments.ckpt)
    query = queryFromArguments(arguments.task, arguments.classes)
    predict(model, arguments.t1, arguments.t2, query, arguments.out, arguments.figure)


def runGenData(arguments):
    for path in generateDatasets(arguments.spec, arguments.out):
        print(path)


def runMetrics(arguments):
    report = scoreDirectories(arguments.pred_dir, arguments.gt_dir, arguments.num_classes)
    print(formatReport(report))
    if arguments.out is not None:
        writeReport(report, arguments.out)


def runVersion(arguments):
    from unichange import __version__
    print(__version__)


def runGitShaKey(arguments):
    from unichange import __git_sha_key__
    print(__git_sha_key__)


def buildParser():
    parser = argparse.ArgumentParser(prog='unichange', description='Instruction-driven change detection.')
    parser.add_argument('-l', dest='log_file', default=None, help='copy log output to a file')
    parser.add_argument('-v', dest='verbosity', default='info', choices=LOG_LEVELS, help='log verbosity')
    commands = parser.add_subparsers(dest='command', required=True)

    train = commands.add_parser('train', help='train a model')
    train.add_argument('--config', required=True, help='TOML or JSON training configuration')
    train.add_argument('--out', default=None, help='checkpoint directory, overrides checkpoint_dir')
    train.add_argument('--resume', default=None, help='checkpoint to resume from')
    train.set_defaults(run=runTrain)

    evaluation = commands.add_parser('eval', help='score a checkpoint on a manifest split')
    evaluation.add_argument('--ckpt', required=True)
    evaluation.add_argument('--manifest', required=True)
    evaluation.add_argument('--split', default='test')
    evaluation.add_argument('--mode', default=GENERATED, choices=(GENERATED, TEACHER_FORCED))
    evaluation.add_argument('--out', default=None, help='JSON report file')
    evaluation.set_defaults(run=runEval)

    prediction = commands.add_parser('predict', help='predict the masks of one image pair')
    prediction.add_argument('--ckpt', required=True)
    prediction.add_argument('--t1', required=True)
    prediction.add_argument('--t2', required=True)
    prediction.add_argument('--task', required=True, choices=('bcd', 'scd'))
    prediction.add_argument('--classes', default=None, help='comma separated class names')
    prediction.add_argument('--out', required=True)
    prediction.add_argument('--figure', action='store_true', help='also write a side-by-side figure')
    prediction.set_defaults(run=runPredict)

    generation = commands.add_parser('gen-data', help='generate synthetic sources')
    generation.add_argument('--spec', required=True, help='TOML or JSON file with a sources list')
    generation.add_argument('--out', required=True)
    generation.set_defaults(run=runGenData)

    metrics = commands.add_parser('metrics', help='score prediction files against ground truth files')
    metrics.add_argument('--pred-dir', dest='pred_dir', required=True)
    metrics.add_argument('--gt-dir', dest='gt_dir', required=True)
    metrics.add_argument('--num-classes', dest='num_classes', type=int, default=None)
    metrics.add_argument('--out', default=None, help='JSON report file')
    metrics.set_defaults(run=runMetrics)

    commands.add_parser('version', help='print the unichange version').set_defaults(run=runVersion)
    commands.add_parser('git_sha_key', help='print the git revision of the source tree').set_defaults(run=runGitShaKey)
    return parser


def main(argv=None):
    """ Run the command line; returns the exit code. """
    arguments = buildParser().parse_args(argv)
    setLogLevel(arguments.verbosity)
    if arguments.log_file is not None:
        setLogOutputFile(arguments.log_file)
    try:
        arguments.run(arguments)
    except NonFiniteLossError as error:
        LOG.error(str(error).strip())
        return EXIT_NON_FINITE
    except BadArguments as error:
        LOG.error(str(error).strip())
        return EXIT_BAD_ARGUMENTS
    return EXIT_SUCCESS


if __name__ == '__main__':
    sys.exit(main())

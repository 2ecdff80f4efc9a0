#
# trajformer - uncertainty aware trajectory prediction for Python
#
# Copyright (C) 2019  SILVAIR sp. z o.o.
#
#
# This program is free software; you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation; either version 2 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program; if not, write to the Free Software
# Foundation, Inc., 51 Franklin St, Fifth Floor, Boston, MA  02110-1301  USA
#
#
import csv
import json
import logging
import os
import sys

from docopt import docopt

from trajformer import __version__
from trajformer.cli.plot import retention_svg, scene_svg, write_svg
from trajformer.config import snapshot
from trajformer.errors import ConfigError, TrajformerError
from trajformer.formats.dataset import read_dataset, write_dataset
from trajformer.metrics import evaluate
from trajformer.model import Predictor, load_weights
from trajformer.scenegen import ScenarioKind, dataset_plan, generate_scenes
from trajformer.schema import RunManifestSchema, load_run_config
from trajformer.seeds import derive_seed, file_digest
from trajformer.trainer import Trainer


DATASET_FILE = 'dataset.svmpds'
MANIFEST_FILE = 'manifest.json'
PREDICTIONS_FILE = 'predictions.csv'

logger = logging.getLogger('trajformer.cli')


def _int(args, name, minimum=0):
    value = args[name]

    try:
        value = int(value)
    except (TypeError, ValueError):
        raise ConfigError('%s expects an integer, got %r' % (name, value))

    if value < minimum:
        raise ConfigError('%s must be at least %d' % (name, minimum))

    return value


def _seed(args):
    return None if args['--seed'] is None else _int(args, '--seed')


def _configs(args):
    return load_run_config(args['--config'], args['--preset'], _seed(args))


def _out(args):
    out = args['--out']
    os.makedirs(out, exist_ok=True)
    return out


def _write_manifest(out, configs, seed, dataset=None, checkpoint=None, artifacts=()):
    manifest = dict(config=snapshot(*configs),
                    dataset=dataset,
                    dataset_sha256=file_digest(dataset) if dataset else None,
                    checkpoint=checkpoint,
                    version=__version__,
                    seed=seed,
                    artifacts=sorted(os.path.basename(i) for i in artifacts))

    path = os.path.join(out, MANIFEST_FILE)
    with open(path, 'w') as f:
        json.dump(RunManifestSchema().dump(manifest), f, indent=2, sort_keys=True)
        f.write('\n')

    return path


def _inference_seed(train):
    return derive_seed(train.seed, 'inference')


def cmd_dataset(args):
    out = _out(args)
    seed = _seed(args) or 0
    kinds = [ScenarioKind[i.upper()] for i in args['--kind']] or None

    plan = dataset_plan(_int(args, '--count'), seed_base=_int(args, '--seed-base'), seed=seed,
                        shifted=args['--shifted'], kinds=kinds)
    path = os.path.join(out, DATASET_FILE)
    write_dataset(path, generate_scenes(plan))

    _write_manifest(out, (), seed, dataset=path, artifacts=[path])
    return path


def cmd_train(args):
    out = _out(args)
    model, train = _configs(args)
    scenes = read_dataset(args['--dataset'], allow_empty=False)

    trainer = Trainer(train, model, scenes, out)
    result = trainer.run()

    artifacts = result.checkpoints + [os.path.join(out, 'train.csv')]
    _write_manifest(out, (model, train), train.seed, dataset=args['--dataset'],
                    checkpoint=result.checkpoints[-1], artifacts=artifacts)
    return result


def _scenes_and_weights(args):
    model, train = _configs(args)
    scenes = read_dataset(args['--dataset'], allow_empty=False)
    weights = load_weights(args['--checkpoint'], model)
    return model, train, scenes, weights


def cmd_eval(args):
    out = _out(args)
    model, train, scenes, weights = _scenes_and_weights(args)

    report = evaluate(weights, model, scenes, _inference_seed(train),
                      stochastic=args['--stochastic'])
    paths = report.save(out, manifest=MANIFEST_FILE)

    _write_manifest(out, (model, train), train.seed, dataset=args['--dataset'],
                    checkpoint=args['--checkpoint'], artifacts=paths.values())
    return report


def write_predictions(path, scenes, bundles):
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(['scene_id', 'k', 'c_k', 'U', 't', 'x', 'y'])

        for scene, bundle in zip(scenes, bundles):
            for k, (trajectory, confidence) in enumerate(zip(bundle.trajectories,
                                                             bundle.confidences)):
                for t, (x, y) in enumerate(trajectory, start=1):
                    writer.writerow([scene.seed, k, '%.9g' % confidence,
                                     '%.9g' % bundle.uncertainty, t, '%.9g' % x, '%.9g' % y])


def cmd_predict(args):
    out = _out(args)
    model, train, scenes, weights = _scenes_and_weights(args)

    predictor = Predictor(weights, model, _inference_seed(train), stochastic=args['--stochastic'])
    path = os.path.join(out, PREDICTIONS_FILE)
    write_predictions(path, scenes, predictor.predict(scenes))

    _write_manifest(out, (model, train), train.seed, dataset=args['--dataset'],
                    checkpoint=args['--checkpoint'], artifacts=[path])
    return path


def cmd_plot(args):
    out = _out(args)
    model, train, scenes, weights = _scenes_and_weights(args)

    try:
        wanted = [int(i) for i in args['--scene']]
    except ValueError:
        raise ConfigError('--scene expects scene seeds, got %s' % args['--scene'])

    selected = [i for i in scenes if i.seed in wanted] if wanted else scenes[:_int(args, '--limit')]

    missing = set(wanted) - set(i.seed for i in selected)
    if missing:
        raise ConfigError('scenes %s not in %s' % (sorted(missing), args['--dataset']))

    seed = _inference_seed(train)
    paths = []

    for scene, bundle in zip(selected, Predictor(weights, model, seed).predict(selected)):
        path = os.path.join(out, 'scene_%d.svg' % scene.seed)
        write_svg(scene_svg(scene, bundle), path)
        paths.append(path)

    report = evaluate(weights, model, scenes, seed)
    path = os.path.join(out, 'retention.svg')
    write_svg(retention_svg(report.curves), path)
    paths.append(path)

    _write_manifest(out, (model, train), train.seed, dataset=args['--dataset'],
                    checkpoint=args['--checkpoint'], artifacts=paths)
    return paths


COMMANDS = dict(dataset=cmd_dataset, train=cmd_train, eval=cmd_eval,
                predict=cmd_predict, plot=cmd_plot)


def main(argv=None):
    '''Uncertainty aware trajectory prediction

    Usage:
        trajformer dataset [options] [--shifted] [--count=<n>] [--seed-base=<n>] [--kind=<kind>]...
        trajformer train [options] --dataset=<path>
        trajformer eval [options] --dataset=<path> --checkpoint=<path> [--stochastic]
        trajformer predict [options] --dataset=<path> --checkpoint=<path> [--stochastic]
        trajformer plot [options] --dataset=<path> --checkpoint=<path> [--scene=<id>]... [--limit=<n>]
        trajformer -h | --help

    Options:
        --config=<path>     JSON run configuration
        --preset=<name>     Configuration preset: desk or paper
        --seed=<u64>        Root seed for every random choice
        --out=<dir>         Output directory [default: .]
        --count=<n>         Number of scenes [default: 100]
        --seed-base=<n>     Seed of the first scene [default: 0]
        --kind=<kind>       Restrict scenario kinds: straight, turn, fork, stop
        --shifted           Draw the distribution-shifted split
        --dataset=<path>    Dataset file
        --checkpoint=<path> Checkpoint file
        --stochastic        Fresh inference noise on every run
        --scene=<id>        Scene to plot
        --limit=<n>         Number of scenes to plot [default: 4]
        -v --verbose        Debug logging
    '''
    args = docopt(main.__doc__, argv=argv)

    logging.basicConfig(level=logging.DEBUG if args['--verbose'] else logging.INFO,
                        format='%(asctime)s %(name)s %(levelname)s %(message)s')

    command = next(name for name in COMMANDS if args[name])

    try:
        if args['--kind'] and any(i.upper() not in ScenarioKind.__members__ for i in args['--kind']):
            raise ConfigError('unknown scenario kind in %s' % args['--kind'])

        COMMANDS[command](args)
    except TrajformerError as ex:
        logger.debug('%s failed', command, exc_info=True)
        print('error: code=%d kind=%s message=%s' % (
            ex.exit_code, ex.kind, ' '.join(str(ex).split())), file=sys.stderr)
        return ex.exit_code
    except Exception as ex:
        logger.exception('%s failed', command)
        print('error: code=1 kind=error message=%s' % ' '.join(str(ex).split()), file=sys.stderr)
        return 1

    return 0


if __name__ == '__main__':
    sys.exit(main())

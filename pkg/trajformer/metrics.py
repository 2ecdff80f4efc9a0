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
"""
Per-scene displacement and likelihood metrics, retention curves and the
evaluation driver that writes ``metrics.csv``, ``retention.csv`` and
``summary.txt``.
"""
import csv
import logging
import math
import os

from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from trajformer.errors import EmptyDatasetError, ShapeError
from trajformer.losses import mixture_nll
from trajformer.model import Predictor
from trajformer.scenegen import DT


logger = logging.getLogger('trajformer.metrics')

DEFAULT_FRACTIONS = np.arange(1, 101) / 100.0


def _check(op, trajectories, ground_truth):
    trajectories = np.asarray(trajectories, dtype=np.float64)
    ground_truth = np.asarray(ground_truth, dtype=np.float64)

    if trajectories.ndim != 3 or trajectories.shape[1:] != ground_truth.shape or ground_truth.shape[-1:] != (2, ):
        raise ShapeError(op, trajectories.shape, ground_truth.shape)

    return trajectories, ground_truth


def displacement(trajectories, ground_truth):
    """
    (K, T) Euclidean distances between each hypothesis and the ground truth.
    """
    trajectories, ground_truth = _check('displacement', trajectories, ground_truth)
    return np.linalg.norm(trajectories - ground_truth, axis=-1)


def ade(trajectories, ground_truth):
    return displacement(trajectories, ground_truth).mean(axis=-1)


def min_ade(trajectories, ground_truth):
    return float(ade(trajectories, ground_truth).min())


def min_fde(trajectories, ground_truth):
    return float(displacement(trajectories, ground_truth)[:, -1].min())


def cnll(trajectories, confidences, ground_truth):
    return mixture_nll(np.asarray(trajectories, dtype=np.float64),
                       np.asarray(confidences, dtype=np.float64),
                       np.asarray(ground_truth, dtype=np.float64)).item()


@dataclass
class RetentionCurve:
    fractions: np.ndarray
    values: np.ndarray
    area: float

    def __str__(self):
        return '<%s: points=%d, area=%.6f>' % (type(self).__name__, len(self.fractions), self.area)


def retention_curve(errors, uncertainties, fractions=DEFAULT_FRACTIONS):
    """
    Keep the ceil(f*N) least uncertain scenes at each fraction f; rejected
    scenes count as zero error. Ties in uncertainty keep scene order.
    """
    errors = np.asarray(errors, dtype=np.float64)
    uncertainties = np.asarray(uncertainties, dtype=np.float64)
    fractions = np.asarray(fractions, dtype=np.float64)

    if errors.ndim != 1 or errors.shape != uncertainties.shape:
        raise ShapeError('retention_curve', errors.shape, uncertainties.shape)

    if not errors.size:
        raise EmptyDatasetError('retention_curve: no scenes')

    if (not fractions.size or np.any(np.diff(fractions) <= 0)
            or fractions[0] <= 0 or fractions[-1] != 1.0):
        raise ValueError('retention_curve: fractions must ascend within (0, 1] and end at 1.0')

    count = errors.size
    order = np.argsort(uncertainties, kind='stable')
    cumulative = np.concatenate([[0.0], np.cumsum(errors[order])])
    kept = np.ceil(np.round(fractions * count, 9)).astype(int)

    values = cumulative[kept] / count
    return RetentionCurve(fractions, values, float(values.mean()))


def constant_velocity_bundle(scene, horizon):
    """
    Single hypothesis extrapolating the target's current velocity.
    """
    velocity = np.asarray(scene.target.velocity, dtype=np.float64)
    position = np.asarray(scene.target.position, dtype=np.float64)
    times = DT * np.arange(1, horizon + 1)[:, np.newaxis]

    return (position + velocity * times)[np.newaxis], np.ones(1)


@dataclass
class PerSceneEval:
    scene_id: int
    min_ade: float
    min_fde: float
    cnll: float
    uncertainty: float
    cv_ade: float = math.nan


def evaluate_scene(scene, bundle):
    ground_truth = scene.future.points
    cv_trajectories, _ = constant_velocity_bundle(scene, len(ground_truth))

    return PerSceneEval(scene_id=scene.seed,
                        min_ade=min_ade(bundle.trajectories, ground_truth),
                        min_fde=min_fde(bundle.trajectories, ground_truth),
                        cnll=cnll(bundle.trajectories, bundle.confidences, ground_truth),
                        uncertainty=float(bundle.uncertainty),
                        cv_ade=min_ade(cv_trajectories, ground_truth))


class EvaluationReport:
    def __init__(self, rows, fractions=DEFAULT_FRACTIONS):
        if not rows:
            raise EmptyDatasetError('evaluation needs at least one scene')

        self.rows = rows
        uncertainties = [i.uncertainty for i in rows]

        self.curves = OrderedDict(
            (name, retention_curve([getattr(i, attr) for i in rows], uncertainties, fractions))
            for name, attr in (('cNLL', 'cnll'), ('minADE_k5', 'min_ade'), ('minFDE_k5', 'min_fde')))

    @property
    def summary(self):
        def mean(attr):
            return float(np.mean([getattr(i, attr) for i in self.rows]))

        return OrderedDict([
            ('R-AUC_cNLL', self.curves['cNLL'].area),
            ('cNLL', mean('cnll')),
            ('minADE_k5', mean('min_ade')),
            ('minFDE_k5', mean('min_fde')),
            ('R-AUC_minADE_k5', self.curves['minADE_k5'].area),
            ('R-AUC_minFDE_k5', self.curves['minFDE_k5'].area),
            ('cv_ADE', mean('cv_ade')),
            ('scenes', len(self.rows)),
        ])

    def write_metrics(self, path):
        with open(path, 'w', newline='') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(['scene_id', 'min_ade', 'min_fde', 'cnll', 'uncertainty'])

            for row in self.rows:
                writer.writerow([row.scene_id] + ['%.9g' % i for i in (
                    row.min_ade, row.min_fde, row.cnll, row.uncertainty)])

    def write_retention(self, path, metric='cNLL'):
        with open(path, 'w', newline='') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(['fraction', 'value'])

            curve = self.curves[metric]
            for fraction, value in zip(curve.fractions, curve.values):
                writer.writerow(['%.2f' % fraction, '%.9g' % value])

    def write_summary(self, path, manifest=None):
        with open(path, 'w') as f:
            for key, value in self.summary.items():
                f.write('%s=%s\n' % (key, value if isinstance(value, int) else '%.6f' % value))

            if manifest is not None:
                f.write('manifest=%s\n' % manifest)

    def save(self, out_dir, manifest=None):
        paths = OrderedDict([
            ('metrics', os.path.join(out_dir, 'metrics.csv')),
            ('retention', os.path.join(out_dir, 'retention.csv')),
            ('summary', os.path.join(out_dir, 'summary.txt')),
        ])

        self.write_metrics(paths['metrics'])
        self.write_retention(paths['retention'])
        self.write_summary(paths['summary'], manifest)
        return paths

    def __str__(self):
        return '<%s: %s>' % (type(self).__name__, ', '.join(
            '%s=%s' % (k, v if isinstance(v, int) else '%.4f' % v) for k, v in self.summary.items()))


def evaluate(weights, config, scenes, seed=0, fractions=DEFAULT_FRACTIONS,
             workers=None, stochastic=False):
    """
    Predict every scene with fixed inference noise and score it.
    """
    if not scenes:
        raise EmptyDatasetError('evaluation needs at least one scene')

    bundles = Predictor(weights, config, seed, stochastic=stochastic).predict(scenes)

    with ThreadPoolExecutor(max_workers=workers) as executor:
        rows = list(executor.map(evaluate_scene, scenes, bundles))

    report = EvaluationReport(rows, fractions)
    logger.info('Evaluated %s', report)
    return report

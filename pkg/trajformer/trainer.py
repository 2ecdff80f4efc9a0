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
Two-phase optimisation: AdamW with warm-up and cosine decay, then SGD with
warm-up and cosine restarts. Optimizer state starts fresh in each phase.
"""
import csv
import logging
import math
import os

from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from trajformer.errors import ConfigError, EmptyDatasetError, NonFiniteError, TrainingDivergedError
from trajformer.diffgraph import backward
from trajformer.losses import total_loss
from trajformer.model import forward, init_weights, save_weights
from trajformer.raster import rasterize_batch
from trajformer.seeds import derive_seed


DIVERGENCE_THRESHOLD = 1e6
WARMUP_FRACTION = 0.05

LOG_FIELDS = ('step', 'phase', 'epoch', 'lr', 'l_pose', 'l_uncertainty')


def cosine_lr(step, base_lr, min_lr, warmup_steps, period, restarts=False):
    if step < warmup_steps:
        return base_lr * step / warmup_steps

    progress = step - warmup_steps
    if restarts:
        progress %= period
    else:
        progress = min(progress, period)

    return min_lr + 0.5 * (base_lr - min_lr) * (1.0 + math.cos(math.pi * progress / period))


def _check_gradients(weights, grads):
    for name, grad in grads.items():
        if grad.shape != weights[name].shape:
            raise ValueError('gradient of %s has shape %s, expected %s' % (
                name, grad.shape, weights[name].shape))

        if not np.isfinite(grad).all():
            raise NonFiniteError('gradient of %s is not finite' % name)


def adamw_state(weights):
    return dict(step=0,
                m={name: np.zeros_like(w.data) for name, w in weights.items()},
                v={name: np.zeros_like(w.data) for name, w in weights.items()})


def adamw_step(weights, grads, state, lr, weight_decay, betas=(0.9, 0.999), eps=1e-8):
    """
    Adam moments on the gradients; decay applied straight to the weights.
    """
    _check_gradients(weights, grads)

    beta1, beta2 = betas
    state['step'] += 1
    correction1 = 1.0 - beta1 ** state['step']
    correction2 = 1.0 - beta2 ** state['step']

    for name, weight in weights.items():
        grad = grads[name]
        m = state['m'][name] = beta1 * state['m'][name] + (1.0 - beta1) * grad
        v = state['v'][name] = beta2 * state['v'][name] + (1.0 - beta2) * grad * grad

        update = lr * (m / correction1) / (np.sqrt(v / correction2) + eps)
        weight.data = (weight.data * (1.0 - lr * weight_decay) - update).astype(weight.dtype)

    return weights


def sgd_state(weights):
    return dict(step=0, momentum={name: np.zeros_like(w.data) for name, w in weights.items()})


def sgd_step(weights, grads, state, lr, weight_decay, momentum=0.9):
    _check_gradients(weights, grads)
    state['step'] += 1

    for name, weight in weights.items():
        grad = grads[name] + weight_decay * weight.data
        buf = state['momentum'][name] = momentum * state['momentum'][name] + grad
        weight.data = (weight.data - lr * buf).astype(weight.dtype)

    return weights


def clip_gradients(grads, max_norm):
    total = math.sqrt(sum(float(np.sum(g.astype(np.float64) ** 2)) for g in grads.values()))

    if total > max_norm:
        scale = max_norm / (total + 1e-12)
        grads = OrderedDict((name, g * scale) for name, g in grads.items())

    return grads, total


@dataclass
class Phase:
    name: str
    epochs: int
    base_lr: float
    restarts: bool


@dataclass
class FitResult:
    weights: OrderedDict
    log: list = field(default_factory=list)
    checkpoints: list = field(default_factory=list)

    def mean_l_pose(self, phase=None, first=True, count=1):
        rows = [i for i in self.log if phase is None or i['phase'] == phase]
        rows = rows[:count] if first else rows[-count:]
        return float(np.mean([i['l_pose'] for i in rows]))


class Trainer:
    """
    Runs ``fit``. Batches are rasterized on a worker thread one step ahead
    of the optimizer, in the seeded shuffle order.
    """
    def __init__(self, train_config, model_config, scenes, out_dir=None):
        self.logger = logging.getLogger('trajformer.trainer')
        self.train_config = train_config
        self.model_config = model_config
        self.scenes = list(scenes)
        self.out_dir = out_dir

        if not self.scenes:
            raise EmptyDatasetError('training needs at least one scene')

        if train_config.batch_size > len(self.scenes):
            raise ConfigError('batch size %d exceeds dataset size %d' % (
                train_config.batch_size, len(self.scenes)))

        self.steps_per_epoch = math.ceil(len(self.scenes) / train_config.batch_size)
        self.shuffle = np.random.default_rng(derive_seed(train_config.seed, 'shuffle'))
        self.weights = init_weights(model_config, derive_seed(train_config.seed, 'init'))
        self.step = 0
        self.epoch = 0
        self.result = FitResult(self.weights)

    @property
    def phases(self):
        config = self.train_config
        return [Phase('adamw', config.epochs_adamw, config.lr_adamw, False),
                Phase('sgd', config.epochs_sgd, config.lr_sgd, True)]

    def _batches(self, executor):
        order = self.shuffle.permutation(len(self.scenes))
        size = self.train_config.batch_size
        indices = [order[i:i + size] for i in range(0, len(order), size)]

        def load(batch):
            scenes = [self.scenes[i] for i in batch]
            rasters = rasterize_batch(scenes, self.model_config.raster)
            ground_truth = np.stack([i.future.points for i in scenes]).astype(np.float32)
            return rasters, ground_truth

        pending = executor.submit(load, indices[0])

        for batch in indices[1:]:
            ready, pending = pending, executor.submit(load, batch)
            yield ready.result()

        yield pending.result()

    def _train_step(self, rasters, ground_truth, phase, phase_step, schedule, state):
        config = self.train_config
        lr = cosine_lr(phase_step, phase.base_lr, config.min_lr, *schedule,
                       restarts=phase.restarts)

        noise_seed = derive_seed(config.seed, 'noise/%d' % self.step)
        dropout = np.random.default_rng(derive_seed(config.seed, 'dropout/%d' % self.step))

        try:
            bundle = forward(rasters, self.weights, self.model_config, noise_seed, dropout)
            losses = total_loss(bundle, ground_truth, config.uncertainty_weight)
        except NonFiniteError as ex:
            raise TrainingDivergedError('step %d: %s' % (self.step, ex))

        if losses.total.item() > DIVERGENCE_THRESHOLD:
            raise TrainingDivergedError('step %d: loss %.3g exceeds %.0e' % (
                self.step, losses.total.item(), DIVERGENCE_THRESHOLD))

        graph = backward(losses.total)
        grads, norm = clip_gradients(
            OrderedDict((name, graph[w]) for name, w in self.weights.items()), config.clip_norm)

        if phase.name == 'adamw':
            adamw_step(self.weights, grads, state, lr, config.weight_decay, config.betas, config.eps)
        else:
            sgd_step(self.weights, grads, state, lr, config.weight_decay, config.momentum)

        row = OrderedDict([('step', self.step), ('phase', phase.name), ('epoch', self.epoch),
                           ('lr', lr), ('l_pose', losses.l_pose_mean.item()),
                           ('l_uncertainty', losses.l_uncertainty.item())])

        self.logger.debug('step=%d lr=%.3g l_pose=%.4f l_uncertainty=%.4f grad_norm=%.3g',
                          self.step, lr, row['l_pose'], row['l_uncertainty'], norm)
        return row

    def run_phase(self, phase, executor):
        total = phase.epochs * self.steps_per_epoch
        warmup = self.train_config.warmup_steps
        if warmup is None:
            warmup = int(WARMUP_FRACTION * total)

        if phase.restarts:
            period = self.train_config.restart_period * self.steps_per_epoch
        else:
            period = max(total - warmup, 1)

        state = adamw_state(self.weights) if phase.name == 'adamw' else sgd_state(self.weights)
        phase_step = 0

        self.logger.info('Phase %s: %d epochs, %d steps, warm-up %d, period %d',
                         phase.name, phase.epochs, total, warmup, period)

        for _ in range(phase.epochs):
            self.epoch += 1
            rows = []

            for rasters, ground_truth in self._batches(executor):
                rows.append(self._train_step(rasters, ground_truth, phase, phase_step,
                                             (warmup, period), state))
                phase_step += 1
                self.step += 1

            self.result.log.extend(rows)
            self.logger.info('Epoch %d (%s): l_pose=%.4f l_uncertainty=%.4f',
                             self.epoch, phase.name,
                             np.mean([i['l_pose'] for i in rows]),
                             np.mean([i['l_uncertainty'] for i in rows]))

            if self.out_dir is not None:
                path = os.path.join(self.out_dir, 'ckpt_epoch_%d' % self.epoch)
                save_weights(path, self.weights)
                self.result.checkpoints.append(path)

    def write_log(self, path):
        with open(path, 'w', newline='') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(LOG_FIELDS)

            for row in self.result.log:
                writer.writerow([row['step'], row['phase'], row['epoch'], '%.9g' % row['lr'],
                                 '%.9g' % row['l_pose'], '%.9g' % row['l_uncertainty']])

    def run(self):
        with ThreadPoolExecutor(max_workers=1) as executor:
            for phase in self.phases:
                if phase.epochs:
                    self.run_phase(phase, executor)

        if self.out_dir is not None:
            self.write_log(os.path.join(self.out_dir, 'train.csv'))

        return self.result


def fit(train_config, model_config, scenes, out_dir=None):
    return Trainer(train_config, model_config, scenes, out_dir).run()

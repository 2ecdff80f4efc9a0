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
Slot decoder: K copies of the latent, each tagged with its own noise sample,
attend to each other and are read out into trajectories, confidences and a
single scene uncertainty.
"""
import math

from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from trajformer import diffgraph as dg
from trajformer.blocks import block, block_shapes, linear, linear_shapes, mlp, norm, norm_shapes
from trajformer.errors import ShapeError
from trajformer.losses import LOG_2PI


# metres per unit of trajectory head output; hypotheses start as straight
# lines moving forward one unit per step
STEP_SCALE = 2.0


@dataclass
class TrajectoryBundle:
    trajectories: dg.Tensor
    confidences: dg.Tensor
    uncertainty: dg.Tensor

    def numpy(self):
        return TrajectoryBundle(self.trajectories.numpy(),
                                self.confidences.numpy(),
                                self.uncertainty.numpy())

    def __len__(self):
        return self.trajectories.shape[0] if len(self.trajectories.shape) == 4 else 1

    def __getitem__(self, index):
        return TrajectoryBundle(self.trajectories[index],
                                self.confidences[index],
                                self.uncertainty[index])

    def __str__(self):
        return '<%s: trajectories=%s, uncertainty=%s>' % (
            type(self).__name__,
            tuple(self.trajectories.shape),
            tuple(self.uncertainty.shape))


def sinusoidal_code(K, dim):
    position = np.arange(K)[:, np.newaxis]
    rate = np.exp(-math.log(10000.0) * (2 * (np.arange(dim) // 2)) / max(dim, 1))
    angles = position * rate
    return np.where(np.arange(dim) % 2 == 0, np.sin(angles), np.cos(angles))


def replicate_and_noise(latent, K, noise_dim, rng_seed, encoding='noise'):
    """
    Repeat ``latent`` K times and append a ``noise_dim`` code to each copy.

    ``rng_seed`` is either one seed for the whole batch or one seed per row;
    a row seeded with ``s`` gets the same noise as a single latent seeded
    with ``s``. The ``sinusoidal`` encoding appends a fixed code of the slot
    index instead of noise.
    """
    latent = dg.as_tensor(latent)
    single = latent.ndim == 1

    if single:
        latent = dg.reshape(latent, (1, ) + latent.shape)

    batch, latent_dim = latent.shape
    slots = dg.reshape(latent, (batch, 1, latent_dim)) + np.zeros((batch, K, latent_dim))

    if noise_dim:
        if encoding == 'sinusoidal':
            code = np.broadcast_to(sinusoidal_code(K, noise_dim), (batch, K, noise_dim))
        elif np.ndim(rng_seed):
            code = np.stack([np.random.default_rng(seed).standard_normal((K, noise_dim))
                             for seed in rng_seed])
        else:
            code = np.random.default_rng(rng_seed).standard_normal((batch, K, noise_dim))

        slots = dg.concat([slots, dg.Tensor(code, dtype=latent.dtype)], axis=-1)

    return dg.reshape(slots, slots.shape[1:]) if single else slots


def decoder_shapes(config):
    dim = config.decoder_dim

    shapes = OrderedDict()
    shapes.update(linear_shapes('dec.input', config.slot_dim, dim))

    for i in range(config.decoder_layers):
        shapes.update(block_shapes('dec.blocks.%d' % i, dim, config.mlp_ratio))

    shapes.update(norm_shapes('dec.norm', dim))
    shapes.update(linear_shapes('dec.traj.fc1', dim, dim))
    shapes.update(linear_shapes('dec.traj.fc2', dim, 2 * config.T))
    shapes.update(linear_shapes('dec.conf', dim, 1))
    shapes.update(linear_shapes('dec.unc.fc1', dim, dim))
    shapes.update(linear_shapes('dec.unc.fc2', dim, 1))
    return shapes


def decoder_priors(config):
    return OrderedDict([
        ('dec.traj.fc2.bias', np.tile([1.0, 0.0], config.T)),
    ])


def decode(slots, weights, config, rng=None):
    """
    Self-attention over the K slots (no positional encoding), then:

    - per slot, an MLP emits T (dx, dy) offsets in units of STEP_SCALE
      metres, summed into positions,
    - per slot, a linear logit; softmax over K gives confidences,
    - the mean-pooled slots go through an MLP to a log excess over the
      smallest reachable NLL, T log 2pi.
    """
    x = dg.as_tensor(slots)
    single = x.ndim == 2

    if single:
        x = dg.reshape(x, (1, ) + x.shape)

    if x.ndim != 3 or x.shape[-1] != weights['dec.input.weight'].shape[0]:
        raise ShapeError('decode', x.shape, weights['dec.input.weight'].shape)

    batch, K, _ = x.shape
    dtype = weights['dec.input.weight'].dtype

    x = linear(x, weights, 'dec.input')

    for i in range(config.decoder_layers):
        x = block(x, weights, 'dec.blocks.%d' % i, config.decoder_heads, config.dropout, rng)

    x = norm(x, weights, 'dec.norm')

    offsets = dg.reshape(mlp(x, weights, 'dec.traj'), (batch, K, config.T, 2)) * STEP_SCALE
    # cumulative sum over time as a lower-triangular matmul
    cumulative = dg.Tensor(np.tril(np.ones((config.T, config.T))), dtype=dtype)
    trajectories = dg.matmul(cumulative, offsets)

    logits = dg.reshape(linear(x, weights, 'dec.conf'), (batch, K))
    confidences = dg.softmax(logits, axis=-1)

    pooled = dg.mean(x, axis=1)
    excess = dg.exp(dg.reshape(mlp(pooled, weights, 'dec.unc'), (batch, )))
    uncertainty = excess + config.T * LOG_2PI

    bundle = TrajectoryBundle(trajectories, confidences, uncertainty)
    return bundle[0] if single else bundle

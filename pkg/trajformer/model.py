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
End-to-end model: weight layout, initialisation, checkpoint I/O and batched
inference.
"""
import logging

from collections import OrderedDict

import numpy as np

from trajformer import diffgraph as dg
from trajformer.blocks import initialize
from trajformer.decoder import (
    TrajectoryBundle, decode, decoder_priors, decoder_shapes, replicate_and_noise
)
from trajformer.encoder import encode, encoder_shapes, patchify
from trajformer.errors import ShapeError
from trajformer.formats.checkpoint import load_checkpoint, save_checkpoint
from trajformer.raster import rasterize_batch
from trajformer.seeds import derive_seed


def weight_shapes(config):
    shapes = encoder_shapes(config)
    shapes.update(decoder_shapes(config))
    return shapes


def init_weights(config, seed, dtype=dg.DEFAULT_DTYPE):
    weights = initialize(weight_shapes(config), np.random.default_rng(seed), dtype)

    for name, value in decoder_priors(config).items():
        weights[name].data[...] = value

    return weights


def check_weights(arrays, config, requires_grad=True):
    """
    Wrap named arrays as weights, verifying names and shapes against ``config``.
    """
    expected = weight_shapes(config)
    weights = OrderedDict()

    for name, shape in expected.items():
        if name not in arrays:
            raise ShapeError('weights[%s]' % name, (), shape)

        array = np.asarray(getattr(arrays[name], 'data', arrays[name]))
        if array.shape != tuple(shape):
            raise ShapeError('weights[%s]' % name, array.shape, shape)

        weights[name] = dg.Tensor(array, requires_grad=requires_grad)

    unexpected = sorted(set(arrays) - set(expected))
    if unexpected:
        raise ShapeError('weights[%s]' % unexpected[0], np.shape(arrays[unexpected[0]]), ())

    return weights


def load_weights(path, config, requires_grad=False):
    return check_weights(load_checkpoint(path), config, requires_grad)


def save_weights(path, weights):
    save_checkpoint(path, weights)


def forward(rasters, weights, config, noise_seed, rng=None):
    """
    (B, C, H, W) rasters to a batched TrajectoryBundle.

    ``noise_seed`` is one seed for the batch or one per raster; ``rng``
    enables dropout.
    """
    latent = encode(patchify(rasters, config.patch_size), weights, config, rng)
    slots = replicate_and_noise(latent, config.K, config.noise_dim, noise_seed,
                                config.slot_encoding)
    return decode(slots, weights, config, rng)


class Predictor:
    """
    Read-only inference over scenes; safe to share between threads.

    Each scene draws its noise from ``seed`` and its own scene seed, so a
    prediction does not depend on batch composition. With ``stochastic``
    the noise is fresh on every call.
    """
    def __init__(self, weights, config, seed=0, batch_size=64, stochastic=False):
        self.logger = logging.getLogger('trajformer.model.Predictor')
        self.weights = OrderedDict((name, dg.Tensor(tensor.data, dtype=tensor.dtype))
                                   for name, tensor in weights.items())
        self.config = config
        self.seed = seed
        self.batch_size = batch_size
        self.stochastic = stochastic

    def noise_seeds(self, scenes):
        if self.stochastic:
            return [np.random.SeedSequence().entropy for _ in scenes]

        return [derive_seed(self.seed, 'scene/%d' % scene.seed) for scene in scenes]

    def predict(self, scenes):
        bundles = []

        for start in range(0, len(scenes), self.batch_size):
            batch = scenes[start:start + self.batch_size]
            rasters = rasterize_batch(batch, self.config.raster)
            bundle = forward(rasters, self.weights, self.config, self.noise_seeds(batch)).numpy()

            bundles.extend(TrajectoryBundle(trajectories, confidences, uncertainty)
                           for trajectories, confidences, uncertainty in zip(
                               bundle.trajectories, bundle.confidences, bundle.uncertainty))

            self.logger.debug('Predicted %d/%d scenes', len(bundles), len(scenes))

        return bundles

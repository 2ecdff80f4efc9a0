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
ViT-style scene encoder: raster patches in, one latent state vector out.
"""
from collections import OrderedDict

import numpy as np

from trajformer import diffgraph as dg
from trajformer.blocks import block, block_shapes, dropout, linear, linear_shapes, norm, norm_shapes
from trajformer.errors import ShapeError
from trajformer.raster import RasterTensor


def patchify(raster, patch_size):
    """
    Split (C, H, W) or (B, C, H, W) into row-major patches of length C*P*P.
    """
    data = raster.data if isinstance(raster, RasterTensor) else np.asarray(raster)
    single = data.ndim == 3

    if single:
        data = data[np.newaxis]

    if data.ndim != 4:
        raise ShapeError('patchify', data.shape, (patch_size, patch_size))

    batch, channels, height, width = data.shape

    if patch_size < 1 or height % patch_size or width % patch_size:
        raise ShapeError('patchify', (height, width), (patch_size, patch_size))

    rows, cols = height // patch_size, width // patch_size
    patches = (data
               .reshape(batch, channels, rows, patch_size, cols, patch_size)
               .transpose(0, 2, 4, 1, 3, 5)
               .reshape(batch, rows * cols, channels * patch_size * patch_size))

    return patches[0] if single else patches


def encoder_shapes(config):
    dim = config.encoder_dim

    shapes = OrderedDict()
    shapes.update(linear_shapes('enc.patch', config.patch_length, dim))
    shapes['enc.cls'] = (1, 1, dim)
    shapes['enc.pos'] = (1, config.patch_count + 1, dim)

    for i in range(config.encoder_layers):
        shapes.update(block_shapes('enc.blocks.%d' % i, dim, config.mlp_ratio))

    shapes.update(norm_shapes('enc.norm', dim))
    shapes.update(linear_shapes('enc.head', dim, config.latent_dim))
    return shapes


def encode(patches, weights, config, rng=None):
    """
    Patch embedding, class token and learned positions, ``encoder_layers``
    pre-norm blocks, final norm, class token through a linear head.

    ``rng`` enables dropout (training only).
    """
    dtype = weights['enc.patch.weight'].dtype
    if isinstance(patches, dg.Tensor):
        patches = patches.data

    x = dg.Tensor(patches, dtype=dtype)
    single = x.ndim == 2

    if single:
        x = dg.reshape(x, (1, ) + x.shape)

    expected = (config.patch_count, config.patch_length)
    if x.ndim != 3 or x.shape[1:] != expected or weights['enc.pos'].shape[1] != expected[0] + 1:
        raise ShapeError('encode', x.shape, weights['enc.pos'].shape)

    batch = x.shape[0]
    cls = dg.Tensor(np.zeros((batch, 1, config.encoder_dim)), dtype=dtype) + weights['enc.cls']

    x = dg.concat([cls, linear(x, weights, 'enc.patch')], axis=1) + weights['enc.pos']
    x = dropout(x, config.dropout, rng)

    for i in range(config.encoder_layers):
        x = block(x, weights, 'enc.blocks.%d' % i, config.encoder_heads, config.dropout, rng)

    x = norm(x, weights, 'enc.norm')
    latent = linear(x[:, 0, :], weights, 'enc.head')

    return dg.reshape(latent, (config.latent_dim, )) if single else latent

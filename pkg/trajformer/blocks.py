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
Layers shared by the encoder and the decoder.

Weights are kept in a flat ``OrderedDict`` mapping dotted names to leaf
Tensors; layer functions take the dict and the name prefix of their weights.
"""
from collections import OrderedDict

import numpy as np

from trajformer import diffgraph as dg


INIT_STD = 0.02


def linear_shapes(name, n_in, n_out):
    return OrderedDict([
        ('%s.weight' % name, (n_in, n_out)),
        ('%s.bias' % name, (n_out, )),
    ])


def norm_shapes(name, dim):
    return OrderedDict([
        ('%s.gain' % name, (dim, )),
        ('%s.bias' % name, (dim, )),
    ])


def block_shapes(name, dim, mlp_ratio):
    shapes = OrderedDict()
    shapes.update(norm_shapes('%s.norm1' % name, dim))
    shapes.update(linear_shapes('%s.qkv' % name, dim, 3 * dim))
    shapes.update(linear_shapes('%s.proj' % name, dim, dim))
    shapes.update(norm_shapes('%s.norm2' % name, dim))
    shapes.update(linear_shapes('%s.fc1' % name, dim, mlp_ratio * dim))
    shapes.update(linear_shapes('%s.fc2' % name, mlp_ratio * dim, dim))
    return shapes


def truncated_normal(rng, shape, std=INIT_STD):
    values = rng.standard_normal(shape)

    while True:
        outside = np.abs(values) > 2.0
        if not outside.any():
            break
        values[outside] = rng.standard_normal(int(outside.sum()))

    return values * std


def initialize(shapes, rng, dtype=dg.DEFAULT_DTYPE):
    weights = OrderedDict()

    for name, shape in shapes.items():
        if name.endswith('.bias'):
            data = np.zeros(shape)
        elif name.endswith('.gain'):
            data = np.ones(shape)
        else:
            data = truncated_normal(rng, shape)

        weights[name] = dg.Tensor(data, requires_grad=True, dtype=dtype)

    return weights


def linear(x, weights, name):
    return dg.matmul(x, weights['%s.weight' % name]) + weights['%s.bias' % name]


def norm(x, weights, name):
    return dg.layer_norm(x) * weights['%s.gain' % name] + weights['%s.bias' % name]


def dropout(x, rate, rng):
    # inverted dropout; identity at inference
    if rng is None or not rate:
        return x

    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return dg.mul(x, keep.astype(x.dtype))


def mlp(x, weights, name):
    return linear(dg.gelu(linear(x, weights, '%s.fc1' % name)), weights, '%s.fc2' % name)


def block(x, weights, name, heads, rate=0.0, rng=None):
    """
    Pre-norm transformer block: x + attn(norm(x)), then x + mlp(norm(x)).
    """
    dim = x.shape[-1]

    qkv = linear(norm(x, weights, '%s.norm1' % name), weights, '%s.qkv' % name)
    attended = dg.scaled_dot_product_attention(qkv[..., :dim],
                                               qkv[..., dim:2 * dim],
                                               qkv[..., 2 * dim:],
                                               heads)
    x = x + dropout(linear(attended, weights, '%s.proj' % name), rate, rng)

    hidden = mlp(norm(x, weights, '%s.norm2' % name), weights, name)
    return x + dropout(hidden, rate, rng)

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
Training objective: mixture NLL of the ground truth under K identity
Gaussians, and an RMSE pulling the uncertainty head towards that NLL.
"""
import math

from dataclasses import dataclass

import numpy as np

from trajformer import diffgraph as dg
from trajformer.errors import ShapeError


LOG_2PI = math.log(2 * math.pi)
CONFIDENCE_TOLERANCE = 1e-5


@dataclass
class LossValues:
    l_pose: dg.Tensor
    l_pose_mean: dg.Tensor
    l_uncertainty: dg.Tensor
    total: dg.Tensor

    def __str__(self):
        return '<%s: l_pose=%.6f, l_uncertainty=%.6f, total=%.6f>' % (
            type(self).__name__,
            self.l_pose_mean.item(),
            self.l_uncertainty.item(),
            self.total.item())


def mixture_nll(trajectories, confidences, ground_truth):
    """
    -log sum_k c_k N(gt; mu=X_k, I) with each trajectory a 2T-dimensional
    Gaussian. Leading batch dimensions are kept; zero confidences hit the
    log floor instead of producing -inf.
    """
    trajectories = dg.as_tensor(trajectories)
    confidences = dg.as_tensor(confidences, like=trajectories)
    ground_truth = dg.as_tensor(ground_truth, like=trajectories)

    *lead, K, T, two = trajectories.shape
    if (two != 2 or tuple(confidences.shape) != (*lead, K)
            or tuple(ground_truth.shape) != (*lead, T, 2)):
        raise ShapeError('mixture_nll', trajectories.shape, confidences.shape, ground_truth.shape)

    total = confidences.data.sum(axis=-1)
    if np.any(np.abs(total - 1.0) > CONFIDENCE_TOLERANCE):
        raise ValueError('mixture_nll: confidences sum to %s, expected 1' % total)

    residual = trajectories - dg.reshape(ground_truth, (*lead, 1, T, 2))
    distance = dg.sum(residual * residual, axis=(-2, -1))
    components = dg.log(confidences) - 0.5 * distance - T * LOG_2PI

    return -dg.logsumexp(components, axis=-1)


def uncertainty_loss(l_pose, uncertainty):
    """
    RMSE between predicted uncertainty and per-sample NLL; the NLL is a
    detached target.
    """
    target = dg.reshape(dg.detach(l_pose), (-1, ))
    uncertainty = dg.reshape(dg.as_tensor(uncertainty, like=target), (-1, ))

    if target.shape != uncertainty.shape:
        raise ShapeError('uncertainty_loss', target.shape, uncertainty.shape)

    if not target.size:
        raise ValueError('uncertainty_loss: empty batch')

    residual = uncertainty - target
    return dg.sqrt(dg.mean(residual * residual))


def total_loss(bundle, ground_truth, weight=1.0):
    l_pose = mixture_nll(bundle.trajectories, bundle.confidences, ground_truth)

    if not l_pose.size:
        raise ValueError('total_loss: empty batch')

    l_pose_mean = dg.mean(l_pose)
    l_uncertainty = uncertainty_loss(l_pose, bundle.uncertainty)

    return LossValues(l_pose, l_pose_mean, l_uncertainty, l_pose_mean + weight * l_uncertainty)

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
import math

import numpy as np
import pytest

from pytest import raises

from trajformer import diffgraph as dg
from trajformer.decoder import TrajectoryBundle
from trajformer.errors import ShapeError
from trajformer.losses import LOG_2PI, mixture_nll, total_loss, uncertainty_loss


def nll(trajectories, confidences, ground_truth):
    return mixture_nll(np.asarray(trajectories, dtype=np.float64),
                       np.asarray(confidences, dtype=np.float64),
                       np.asarray(ground_truth, dtype=np.float64)).item()


@pytest.mark.parametrize("trajectories, confidences, ground_truth, expected", [
    pytest.param([[[0.0, 0.0]]], [1.0], [[0.0, 0.0]], 1.837877, id="exact"),
    pytest.param([[[1.0, 0.0]]], [1.0], [[0.0, 0.0]], 2.337877, id="offset"),
    pytest.param([[[0.0, 0.0]], [[100.0, 0.0]]], [0.5, 0.5], [[0.0, 0.0]], 2.531024, id="far"),
    pytest.param(np.zeros((1, 25, 2)), [1.0], np.zeros((25, 2)), 45.946918, id="horizon"),
])
def test_mixture_nll_closed_forms(trajectories, confidences, ground_truth, expected):
    assert nll(trajectories, confidences, ground_truth) == pytest.approx(expected, abs=1e-5)


def test_mixture_nll_float32_horizon():
    value = mixture_nll(np.zeros((1, 25, 2), np.float32), np.ones(1, np.float32),
                        np.zeros((25, 2), np.float32)).item()

    assert value == pytest.approx(25 * LOG_2PI, abs=1e-4)


def test_mixture_nll_zero_confidence_is_finite():
    value = nll([[[0.0, 0.0]], [[1.0, 1.0]]], [1.0, 0.0], [[0.0, 0.0]])

    assert value == pytest.approx(LOG_2PI, abs=1e-6)


def test_mixture_nll_lower_bound():
    rng = np.random.default_rng(0)

    for _ in range(1000):
        K, T = int(rng.integers(1, 6)), int(rng.integers(1, 6))
        confidences = rng.dirichlet(np.ones(K))
        ground_truth = rng.normal(scale=3.0, size=(T, 2))
        trajectories = ground_truth + rng.normal(scale=rng.uniform(0, 3), size=(K, T, 2))

        assert nll(trajectories, confidences, ground_truth) >= T * LOG_2PI - 1e-9


def test_mixture_nll_permutation_invariance():
    rng = np.random.default_rng(1)
    trajectories = rng.normal(size=(5, 4, 2))
    confidences = rng.dirichlet(np.ones(5))
    ground_truth = rng.normal(size=(4, 2))
    order = [2, 4, 0, 1, 3]

    assert nll(trajectories[order], confidences[order], ground_truth) == pytest.approx(
        nll(trajectories, confidences, ground_truth), abs=1e-9)


def test_mixture_nll_monotone_in_distance():
    rng = np.random.default_rng(2)

    for _ in range(100):
        ground_truth = rng.normal(size=(3, 2))
        offsets = rng.normal(size=(4, 3, 2))
        confidences = rng.dirichlet(np.ones(4))
        previous = -math.inf

        for scale in (0.5, 1.0, 1.5, 3.0):
            value = nll(ground_truth + scale * offsets, confidences, ground_truth)
            assert value >= previous - 1e-9
            previous = value


def test_mixture_nll_batched():
    rng = np.random.default_rng(3)
    trajectories = rng.normal(size=(3, 2, 4, 2))
    confidences = rng.dirichlet(np.ones(2), size=3)
    ground_truth = rng.normal(size=(3, 4, 2))

    batched = mixture_nll(trajectories, confidences, ground_truth).data

    assert batched.shape == (3, )
    for i in range(3):
        assert batched[i] == pytest.approx(nll(trajectories[i], confidences[i], ground_truth[i]))


@pytest.mark.parametrize("shapes", [
    pytest.param(((2, 3, 2), (3, ), (3, 2)), id="confidences"),
    pytest.param(((2, 3, 2), (2, ), (4, 2)), id="horizon"),
    pytest.param(((2, 3, 3), (2, ), (3, 3)), id="coordinates"),
])
def test_mixture_nll_shape_mismatch(shapes):
    trajectories, confidences, ground_truth = (np.zeros(i) for i in shapes)

    with raises(ShapeError):
        mixture_nll(trajectories, np.full(confidences.shape, 1.0 / confidences.size), ground_truth)


def test_mixture_nll_rejects_unnormalized_confidences():
    with raises(ValueError):
        nll(np.zeros((2, 1, 2)), [0.7, 0.7], np.zeros((1, 2)))


def test_mixture_nll_gradients():
    rng = np.random.default_rng(4)
    trajectories = dg.Tensor(rng.normal(size=(3, 4, 2)))
    logits = dg.Tensor(rng.normal(size=3))
    ground_truth = rng.normal(size=(4, 2))

    assert dg.grad_check(lambda t: mixture_nll(t, dg.softmax(logits), ground_truth),
                         trajectories) < 1e-2
    assert dg.grad_check(lambda l: mixture_nll(trajectories, dg.softmax(l), ground_truth),
                         logits) < 1e-2


@pytest.mark.parametrize("targets, predicted, expected", [
    pytest.param([1.5, -2.0, 7.0], [1.5, -2.0, 7.0], 0.0, id="exact"),
    pytest.param([0.0, 0.0], [2.0, 4.0], math.sqrt(10.0), id="hand"),
    pytest.param([45.946918], [45.946918], 0.0, id="single"),
    pytest.param([0.0, 0.0], [-2.0, -4.0], math.sqrt(10.0), id="sign"),
])
def test_uncertainty_loss(targets, predicted, expected):
    value = uncertainty_loss(np.array(targets), np.array(predicted)).item()

    assert value == pytest.approx(expected, abs=1e-6)


def test_uncertainty_loss_errors():
    with raises(ShapeError):
        uncertainty_loss(np.zeros(2), np.zeros(3))

    with raises(ValueError):
        uncertainty_loss(np.zeros(0), np.zeros(0))


def test_uncertainty_loss_detaches_targets():
    l_pose = dg.Tensor([1.0, 2.0], requires_grad=True)
    predicted = dg.Tensor([3.0, 1.0], requires_grad=True)

    graph = dg.backward(uncertainty_loss(l_pose, predicted))

    assert not graph[l_pose].any()
    assert graph[predicted].any()


def bundle(trajectories, confidences, uncertainty):
    return TrajectoryBundle(dg.Tensor(trajectories, dtype=np.float64),
                            dg.Tensor(confidences, dtype=np.float64),
                            dg.Tensor(uncertainty, dtype=np.float64))


def test_total_loss_without_uncertainty_weight():
    values = total_loss(bundle(np.zeros((2, 1, 1, 2)), np.ones((2, 1)), [5.0, -3.0]),
                        np.array([[[0.0, 0.0]], [[1.0, 0.0]]]), weight=0.0)

    assert values.total.item() == pytest.approx((1.837877 + 2.337877) / 2, abs=1e-6)
    assert values.l_pose.shape == (2, )


def test_total_loss_perfect_prediction():
    values = total_loss(bundle(np.zeros((1, 1, 25, 2)), np.ones((1, 1)), [25 * LOG_2PI]),
                        np.zeros((1, 25, 2)))

    assert values.l_uncertainty.item() == pytest.approx(0.0, abs=1e-9)
    assert values.total.item() == pytest.approx(25 * LOG_2PI, abs=1e-6)


def test_total_loss_single_sample():
    values = total_loss(bundle(np.array([[[1.0, 0.0]]]), [1.0], 2.337877), np.zeros((1, 2)))

    assert values.total.item() == pytest.approx(2.337877, abs=1e-6)

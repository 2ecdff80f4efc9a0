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
from dataclasses import replace

import numpy as np
import pytest

from pytest import fixture, raises

from trajformer import diffgraph as dg
from trajformer.config import ModelConfig
from trajformer.decoder import STEP_SCALE, decode, decoder_shapes, replicate_and_noise, sinusoidal_code
from trajformer.encoder import encode, encoder_shapes, patchify
from trajformer.errors import ShapeError
from trajformer.losses import LOG_2PI, mixture_nll, uncertainty_loss
from trajformer.model import Predictor, check_weights, forward, init_weights, load_weights, save_weights
from trajformer.raster import rasterize, rasterize_batch
from trajformer.scenegen import Agent, MapElement, MapElementKind, ScenarioKind, generate_scene


@fixture
def config():
    return ModelConfig(patch_size=16, encoder_layers=1, encoder_dim=32, encoder_heads=2,
                       latent_dim=16, noise_dim=4, decoder_layers=1, decoder_dim=32,
                       decoder_heads=2)


@fixture
def weights(config):
    return init_weights(config, seed=1)


@fixture
def scenes():
    return [generate_scene(seed, kind, 0.3)
            for seed, kind in enumerate([ScenarioKind.STRAIGHT, ScenarioKind.TURN,
                                         ScenarioKind.FORK, ScenarioKind.STOP])]


@pytest.mark.parametrize("patch_size, shape", [
    pytest.param(8, (64, 768), id="P=8"),
    pytest.param(64, (1, 12 * 64 * 64), id="P=64"),
    pytest.param(16, (16, 12 * 16 * 16), id="P=16"),
])
def test_patchify_shapes(patch_size, shape):
    assert patchify(np.zeros((12, 64, 64)), patch_size).shape == shape


def test_patchify_indivisible():
    with raises(ShapeError):
        patchify(np.zeros((12, 64, 64)), 7)


def test_patchify_is_row_major():
    raster = np.arange(12 * 64 * 64, dtype=np.float32).reshape(12, 64, 64)
    patches = patchify(raster, 8)

    assert np.array_equal(patches[1], raster[:, 0:8, 8:16].reshape(-1))
    assert np.array_equal(patches[8], raster[:, 8:16, 0:8].reshape(-1))


def test_patchify_batch():
    batch = np.random.default_rng(0).random((3, 12, 64, 64))

    assert patchify(batch, 8).shape == (3, 64, 768)
    assert np.array_equal(patchify(batch, 8)[2], patchify(batch[2], 8))


def test_encode_desk_latent_length():
    config = ModelConfig.preset('desk')
    weights = init_weights(config, seed=0)
    latent = encode(patchify(rasterize(generate_scene(0, ScenarioKind.STRAIGHT)), 8), weights, config)

    assert latent.shape == (64, )


def test_paper_preset_shapes():
    config = ModelConfig.preset('paper')

    assert encoder_shapes(config)['enc.head.weight'] == (768, 512)
    assert encoder_shapes(config)['enc.pos'] == (1, 17, 768)
    assert decoder_shapes(config)['dec.input.weight'] == (520, 2048)
    assert replicate_and_noise(np.zeros(512), 5, 8, rng_seed=0).shape == (5, 520)


def test_encode_is_deterministic_and_input_dependent(config, weights, scenes):
    first = patchify(rasterize(scenes[0]), config.patch_size)
    second = patchify(rasterize(scenes[1]), config.patch_size)

    assert np.array_equal(encode(first, weights, config).data, encode(first, weights, config).data)
    assert not np.allclose(encode(first, weights, config).data, encode(second, weights, config).data)


def test_latent_ignores_content_outside_raster(config, weights, scenes):
    scene = scenes[2]
    far = np.zeros((1, scene.history.shape[1], 3))
    far[0, :, :2] = (400.0, -350.0)
    crowded = replace(scene,
                      agents=scene.agents + [Agent((400.0, -350.0), (5.0, 0.0), (0.0, 0.0), 0.0)],
                      map=scene.map + [MapElement(MapElementKind.LANE, [(300.0, 300.0), (320.0, 300.0)],
                                                  direction=1, speed_limit=13.9, priority=False)],
                      history=np.concatenate([scene.history, far]))

    def latent(scene):
        return encode(patchify(rasterize(scene), config.patch_size), weights, config).data

    assert len(crowded.agents) == len(scene.agents) + 1
    assert np.array_equal(latent(crowded), latent(scene))


def test_encode_rejects_wrong_patches(config, weights):
    with raises(ShapeError):
        encode(np.zeros((16, 100)), weights, config)


def test_replicate_and_noise_rows_share_latent():
    latent = np.arange(6, dtype=np.float32)
    slots = replicate_and_noise(latent, 5, 3, rng_seed=9).data

    assert slots.shape == (5, 9)
    assert np.all(slots[:, :6] == latent)
    assert len({tuple(i) for i in slots[:, 6:]}) == 5


def test_replicate_and_noise_without_noise():
    slots = replicate_and_noise(np.ones(4), 3, 0, rng_seed=1).data

    assert slots.shape == (3, 4)
    assert np.all(slots == slots[0])


def test_replicate_and_noise_is_seeded():
    latent = np.zeros(4)

    assert np.array_equal(replicate_and_noise(latent, 5, 8, 3).data,
                          replicate_and_noise(latent, 5, 8, 3).data)
    assert not np.array_equal(replicate_and_noise(latent, 5, 8, 3).data,
                              replicate_and_noise(latent, 5, 8, 4).data)


def test_replicate_and_noise_per_row_seeds():
    batch = replicate_and_noise(np.zeros((2, 4)), 5, 8, [11, 12]).data

    assert np.array_equal(batch[1], replicate_and_noise(np.zeros(4), 5, 8, 12).data)


def test_sinusoidal_slots_are_fixed_and_distinct():
    slots = replicate_and_noise(np.zeros(4), 5, 8, rng_seed=None, encoding='sinusoidal').data

    assert np.allclose(slots[:, 4:], sinusoidal_code(5, 8))
    assert len({tuple(i) for i in slots}) == 5


def test_decode_shapes(config, weights):
    slots = replicate_and_noise(np.zeros(config.latent_dim), config.K, config.noise_dim, 0)
    bundle = decode(slots, weights, config)

    assert bundle.trajectories.shape == (5, 25, 2)
    assert bundle.confidences.shape == (5, )
    assert bundle.uncertainty.shape == ()
    assert abs(bundle.confidences.data.sum() - 1.0) < 1e-6


def test_decode_rejects_wrong_slot_width(config, weights):
    with raises(ShapeError):
        decode(np.zeros((5, config.slot_dim + 1)), weights, config)


def test_identical_slots_give_identical_trajectories(config):
    config = replace(config, noise_dim=0)
    weights = init_weights(config, seed=2)
    rng = np.random.default_rng(0)
    bundle = decode(replicate_and_noise(rng.normal(size=config.latent_dim), 5, 0, 0), weights, config)

    assert np.allclose(bundle.trajectories.data, bundle.trajectories.data[0], atol=1e-6)
    assert np.allclose(bundle.confidences.data, 0.2, atol=1e-6)


def test_decode_is_permutation_equivariant(config, weights):
    slots = np.random.default_rng(5).normal(size=(5, config.slot_dim)).astype(np.float32)
    order = [3, 0, 4, 1, 2]

    plain = decode(slots, weights, config)
    permuted = decode(slots[order], weights, config)

    assert np.allclose(permuted.trajectories.data, plain.trajectories.data[order], atol=1e-5)
    assert np.allclose(permuted.confidences.data, plain.confidences.data[order], atol=1e-6)
    assert np.allclose(permuted.uncertainty.data, plain.uncertainty.data, atol=1e-5)


def test_confidence_logit_shift_invariance(config, weights):
    slots = np.random.default_rng(6).normal(size=(5, config.slot_dim)).astype(np.float32)
    before = decode(slots, weights, config).confidences.data

    weights['dec.conf.bias'].data = weights['dec.conf.bias'].data + np.float32(3.0)
    after = decode(slots, weights, config).confidences.data

    assert np.allclose(before, after, atol=1e-6)


def test_trajectories_are_cumulative_offsets(config, weights):
    slots = replicate_and_noise(np.zeros(config.latent_dim), config.K, config.noise_dim, 0)
    bundle = decode(slots, weights, config)
    offsets = np.diff(bundle.trajectories.data, axis=1, prepend=0.0)

    assert np.allclose(np.cumsum(offsets, axis=1), bundle.trajectories.data, atol=1e-5)


def test_initial_hypotheses_move_forward(config, weights, scenes):
    bundle = forward(rasterize_batch(scenes), weights, config, noise_seed=0)
    final = bundle.trajectories.data[:, :, -1, :]
    expected = STEP_SCALE * config.T

    assert np.all(np.abs(final[..., 0] - expected) < 0.2 * expected)
    assert np.all(np.abs(final[..., 1]) < 0.2 * expected)
    assert np.all(bundle.uncertainty.data > config.T * LOG_2PI)


def test_forward_batch(config, weights, scenes):
    bundle = forward(rasterize_batch(scenes), weights, config, noise_seed=[1, 2, 3, 4])

    assert bundle.trajectories.shape == (4, 5, 25, 2)
    assert bundle.confidences.shape == (4, 5)
    assert bundle.uncertainty.shape == (4, )
    assert len(bundle) == 4


def test_predictor_does_not_depend_on_batch(config, weights, scenes):
    together = Predictor(weights, config, seed=3, batch_size=4).predict(scenes)
    alone = Predictor(weights, config, seed=3, batch_size=1).predict(scenes)

    for a, b in zip(together, alone):
        assert np.allclose(a.trajectories, b.trajectories, atol=1e-4)
        assert np.allclose(a.confidences, b.confidences, atol=1e-6)


def test_predictor_stochastic_noise(config, weights, scenes):
    predictor = Predictor(weights, config, stochastic=True)
    first, second = predictor.predict(scenes[:1]), predictor.predict(scenes[:1])

    assert not np.array_equal(first[0].trajectories, second[0].trajectories)


def test_init_weights_is_seeded(config):
    first, second, other = init_weights(config, 4), init_weights(config, 4), init_weights(config, 5)

    assert all(np.array_equal(first[i].data, second[i].data) for i in first)
    assert not np.array_equal(first['enc.patch.weight'].data, other['enc.patch.weight'].data)
    assert np.abs(first['enc.patch.weight'].data).max() <= 0.04 + 1e-7
    assert not first['enc.patch.bias'].data.any()
    assert np.all(first['enc.norm.gain'].data == 1.0)


def test_weight_names(weights):
    assert all(name.startswith(('enc.', 'dec.')) for name in weights)


def test_check_weights(config, weights):
    arrays = {name: tensor.data for name, tensor in weights.items()}
    assert list(check_weights(arrays, config)) == list(weights)

    arrays['dec.conf.weight'] = np.zeros((3, 3), dtype=np.float32)
    with raises(ShapeError):
        check_weights(arrays, config)

    del arrays['dec.conf.weight']
    with raises(ShapeError):
        check_weights(arrays, config)


def test_checkpoint_roundtrip_through_model(tmp_path, config, weights):
    path = str(tmp_path / 'ckpt')
    save_weights(path, weights)
    loaded = load_weights(path, config)

    assert all(np.array_equal(loaded[i].data, weights[i].data) for i in weights)

    other = replace(config, latent_dim=8)
    with raises(ShapeError):
        load_weights(path, other)


def test_end_to_end_gradients_match_finite_differences():
    config = ModelConfig.preset('desk')
    weights = init_weights(config, seed=0)
    reference = {name: tensor.astype(np.float64) for name, tensor in weights.items()}

    scene = generate_scene(1, ScenarioKind.TURN, 0.3)
    rasters = rasterize_batch([scene])
    ground_truth = scene.future.points[np.newaxis]

    # uncertainty target held constant, as training detaches it
    bundle = forward(rasters, reference, config, noise_seed=7)
    target = mixture_nll(bundle.trajectories, bundle.confidences, ground_truth).data + 10.0

    def objective(table, name):
        def loss(x):
            bundle = forward(rasters, dict(table, **{name: x}), config, noise_seed=7)
            l_pose = mixture_nll(bundle.trajectories, bundle.confidences, ground_truth)
            return dg.mean(l_pose) + uncertainty_loss(target, bundle.uncertainty)
        return loss

    worst = 0.0
    for index, name in enumerate(weights):
        worst = max(worst, dg.grad_check(objective(weights, name), weights[name],
                                         elements=1, seed=index,
                                         reference=objective(reference, name)))

    assert worst < 1e-2

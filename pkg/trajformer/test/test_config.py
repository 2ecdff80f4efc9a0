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
import json

from dataclasses import replace

import pytest

from trajformer.config import ModelConfig, RasterConfig, TrainConfig, snapshot
from trajformer.errors import ConfigError, MissingFileError
from trajformer.schema import load_run_config


@pytest.fixture
def config_file(tmp_path):
    def write(content):
        path = tmp_path / 'config.json'
        path.write_text(content if isinstance(content, str) else json.dumps(content))
        return str(path)

    return write


def test_desk_preset():
    model = ModelConfig.preset('desk')

    assert model.patch_count == 64
    assert model.patch_length == 12 * 8 * 8
    assert model.slot_dim == 72
    assert model.raster.ego_pixel == (48, 32)


def test_paper_preset():
    model = ModelConfig.preset('paper')
    train = TrainConfig.preset('paper')

    assert model.patch_count == 16
    assert model.encoder_dim == 768
    assert model.slot_dim == 520
    assert train.batch_size == 1024
    assert train.epochs_adamw == train.epochs_sgd == 40


def test_unknown_preset():
    with pytest.raises(ConfigError):
        ModelConfig.preset('laptop')


@pytest.mark.parametrize("overrides", [
    pytest.param(dict(K=0), id="K"),
    pytest.param(dict(patch_size=7), id="patch_size"),
    pytest.param(dict(encoder_heads=3), id="encoder_heads"),
    pytest.param(dict(decoder_heads=3), id="decoder_heads"),
    pytest.param(dict(dropout=1.0), id="dropout"),
    pytest.param(dict(slot_encoding='learned'), id="slot_encoding"),
])
def test_invalid_model(overrides):
    with pytest.raises(ConfigError):
        ModelConfig(**overrides)


@pytest.mark.parametrize("overrides", [
    pytest.param(dict(epochs_adamw=0, epochs_sgd=0), id="epochs"),
    pytest.param(dict(lr_adamw=0), id="lr"),
    pytest.param(dict(batch_size=0), id="batch_size"),
    pytest.param(dict(weight_decay=-1), id="weight_decay"),
    pytest.param(dict(warmup_steps=-1), id="warmup_steps"),
])
def test_invalid_train(overrides):
    with pytest.raises(ConfigError):
        TrainConfig(**overrides)


@pytest.mark.parametrize("overrides", [
    pytest.param(dict(channels=3), id="channels"),
    pytest.param(dict(meters_per_pixel=0), id="meters_per_pixel"),
    pytest.param(dict(ego_pixel=(64, 0)), id="ego_pixel"),
])
def test_invalid_raster(overrides):
    with pytest.raises(ConfigError):
        RasterConfig(**overrides)


def test_snapshot():
    train = TrainConfig(seed=4)
    data = snapshot(ModelConfig(), train)

    assert set(data) == {'ModelConfig', 'TrainConfig'}
    assert data['ModelConfig']['raster']['height'] == 64
    assert data['TrainConfig']['seed'] == 4


def test_load_defaults():
    model, train = load_run_config()

    assert model == ModelConfig()
    assert train == TrainConfig()


def test_load_overrides(config_file):
    path = config_file(dict(preset='paper',
                            model=dict(K=3),
                            train=dict(batch_size=8, seed=5),
                            raster=dict(height=32, width=32, ego_pixel=[24, 16])))

    model, train = load_run_config(path)

    assert model.K == 3
    assert model.encoder_dim == 768
    assert model.raster.ego_pixel == (24, 16)
    assert train.batch_size == 8
    assert train.epochs_adamw == 40
    assert train.seed == 5


def test_command_line_wins(config_file):
    path = config_file(dict(preset='paper', train=dict(seed=5)))

    model, train = load_run_config(path, preset='desk', seed=9)

    assert model == ModelConfig()
    assert train == replace(TrainConfig(), seed=9)


@pytest.mark.parametrize("content", [
    pytest.param('{"model": ', id="json"),
    pytest.param({'model': {'depth': 3}}, id="unknown key"),
    pytest.param({'preset': 'laptop'}, id="preset"),
    pytest.param({'model': {'K': 0}}, id="range"),
    pytest.param({'model': {'patch_size': 5}}, id="divisibility"),
])
def test_load_malformed(config_file, content):
    with pytest.raises(ConfigError):
        load_run_config(config_file(content))


def test_load_missing(tmp_path):
    with pytest.raises(MissingFileError):
        load_run_config(str(tmp_path / 'absent.json'))

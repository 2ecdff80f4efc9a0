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
import os

from dataclasses import dataclass, field, replace

from marshmallow import Schema, ValidationError, fields, decorators, validate

from trajformer.config import ModelConfig, RasterConfig, TrainConfig
from trajformer.errors import ConfigError, MissingFileError


PRESETS = ('desk', 'paper')


class RasterConfigSchema(Schema):
    channels = fields.Integer()
    height = fields.Integer(validate=validate.Range(min=1))
    width = fields.Integer(validate=validate.Range(min=1))
    meters_per_pixel = fields.Float(validate=validate.Range(min=0, min_inclusive=False))
    ego_pixel = fields.Tuple((fields.Integer(), fields.Integer()))


class ModelConfigSchema(Schema):
    K = fields.Integer(validate=validate.Range(min=1))
    T = fields.Integer(validate=validate.Range(min=1))
    patch_size = fields.Integer(validate=validate.Range(min=1))
    encoder_layers = fields.Integer(validate=validate.Range(min=0))
    encoder_dim = fields.Integer(validate=validate.Range(min=1))
    encoder_heads = fields.Integer(validate=validate.Range(min=1))
    latent_dim = fields.Integer(validate=validate.Range(min=1))
    noise_dim = fields.Integer(validate=validate.Range(min=0))
    decoder_layers = fields.Integer(validate=validate.Range(min=0))
    decoder_dim = fields.Integer(validate=validate.Range(min=1))
    decoder_heads = fields.Integer(validate=validate.Range(min=1))
    mlp_ratio = fields.Integer(validate=validate.Range(min=1))
    dropout = fields.Float(validate=validate.Range(min=0, max=1, max_inclusive=False))
    slot_encoding = fields.String(validate=validate.OneOf(['noise', 'sinusoidal']))


class TrainConfigSchema(Schema):
    epochs_adamw = fields.Integer(validate=validate.Range(min=0))
    epochs_sgd = fields.Integer(validate=validate.Range(min=0))
    lr_adamw = fields.Float()
    lr_sgd = fields.Float()
    weight_decay = fields.Float()
    batch_size = fields.Integer(validate=validate.Range(min=1))
    warmup_steps = fields.Integer(allow_none=True)
    min_lr = fields.Float()
    restart_period = fields.Integer(validate=validate.Range(min=1))
    seed = fields.Integer(validate=validate.Range(min=0))
    uncertainty_weight = fields.Float()
    clip_norm = fields.Float()
    betas = fields.Tuple((fields.Float(), fields.Float()))
    eps = fields.Float()
    momentum = fields.Float()


@dataclass
class RunConfig:
    preset: str = None
    model: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)
    raster: dict = field(default_factory=dict)

    def build(self, preset=None, seed=None):
        """
        Preset, then file sections, then command line overrides.
        """
        preset = preset or self.preset or 'desk'

        try:
            raster = RasterConfig(**self.raster)
            model = ModelConfig.preset(preset, raster=raster, **self.model)
            train = TrainConfig.preset(preset, **self.train)
        except TypeError as ex:
            raise ConfigError(str(ex))

        if seed is not None:
            train = replace(train, seed=seed)

        return model, train


class RunConfigSchema(Schema):
    preset = fields.String(validate=validate.OneOf(PRESETS))
    model = fields.Nested(ModelConfigSchema)
    train = fields.Nested(TrainConfigSchema)
    raster = fields.Nested(RasterConfigSchema)

    @decorators.post_load
    def _to_object(self, data, **kwargs):
        return RunConfig(**data)


class RunManifestSchema(Schema):
    config = fields.Dict()
    dataset = fields.String()
    dataset_sha256 = fields.String()
    checkpoint = fields.String(allow_none=True)
    version = fields.String()
    seed = fields.Integer()
    artifacts = fields.List(fields.String())


def load_run_config(path=None, preset=None, seed=None):
    if path is None:
        return RunConfig().build(preset, seed)

    if not os.path.exists(path):
        raise MissingFileError('config %s does not exist' % path)

    with open(path) as f:
        try:
            run_config = RunConfigSchema().loads(f.read())
        except (ValidationError, json.JSONDecodeError) as ex:
            raise ConfigError('config %s is malformed: %s' % (path, ex))

    return run_config.build(preset, seed)

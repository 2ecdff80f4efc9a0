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
from dataclasses import dataclass, field, asdict

from trajformer.errors import ConfigError


CHANNELS = 12


@dataclass(frozen=True)
class RasterConfig:
    channels: int = CHANNELS
    height: int = 64
    width: int = 64
    meters_per_pixel: float = 0.5
    ego_pixel: tuple = (48, 32)

    def __post_init__(self):
        object.__setattr__(self, 'ego_pixel', tuple(self.ego_pixel))

        if self.channels != CHANNELS:
            raise ConfigError('raster: expected %d channels, got %d' % (CHANNELS, self.channels))

        if self.height < 1 or self.width < 1 or self.meters_per_pixel <= 0:
            raise ConfigError('raster: invalid geometry %dx%d @ %s m/px' % (
                self.height, self.width, self.meters_per_pixel))

        row, col = self.ego_pixel
        if not (0 <= row < self.height and 0 <= col < self.width):
            raise ConfigError('raster: ego pixel %s outside %dx%d grid' % (
                self.ego_pixel, self.height, self.width))


@dataclass(frozen=True)
class ModelConfig:
    K: int = 5
    T: int = 25
    patch_size: int = 8
    encoder_layers: int = 4
    encoder_dim: int = 128
    encoder_heads: int = 4
    latent_dim: int = 64
    noise_dim: int = 8
    decoder_layers: int = 2
    decoder_dim: int = 256
    decoder_heads: int = 4
    mlp_ratio: int = 4
    dropout: float = 0.1
    slot_encoding: str = 'noise'
    raster: RasterConfig = field(default_factory=RasterConfig)

    PRESETS = {
        'desk': dict(),
        'paper': dict(patch_size=16,
                      encoder_layers=12, encoder_dim=768, encoder_heads=12,
                      latent_dim=512, noise_dim=8,
                      decoder_layers=8, decoder_dim=2048, decoder_heads=8),
    }

    def __post_init__(self):
        if self.K < 1 or self.T < 1:
            raise ConfigError('model: K and T must be positive, got K=%d T=%d' % (self.K, self.T))

        if self.raster.height % self.patch_size or self.raster.width % self.patch_size:
            raise ConfigError('model: raster %dx%d not divisible by patch size %d' % (
                self.raster.height, self.raster.width, self.patch_size))

        if self.encoder_dim % self.encoder_heads:
            raise ConfigError('model: encoder_dim %d not divisible by %d heads' % (
                self.encoder_dim, self.encoder_heads))

        if self.decoder_dim % self.decoder_heads:
            raise ConfigError('model: decoder_dim %d not divisible by %d heads' % (
                self.decoder_dim, self.decoder_heads))

        if self.noise_dim < 0 or not 0 <= self.dropout < 1:
            raise ConfigError('model: invalid noise_dim=%d or dropout=%s' % (
                self.noise_dim, self.dropout))

        if self.slot_encoding not in ('noise', 'sinusoidal'):
            raise ConfigError('model: unknown slot encoding %r' % self.slot_encoding)

    @classmethod
    def preset(cls, name, **overrides):
        try:
            values = dict(cls.PRESETS[name])
        except KeyError:
            raise ConfigError('unknown preset %r' % name)

        values.update(overrides)
        return cls(**values)

    @property
    def patch_count(self):
        return (self.raster.height // self.patch_size) * (self.raster.width // self.patch_size)

    @property
    def patch_length(self):
        return self.raster.channels * self.patch_size ** 2

    @property
    def slot_dim(self):
        return self.latent_dim + self.noise_dim


@dataclass(frozen=True)
class TrainConfig:
    epochs_adamw: int = 10
    epochs_sgd: int = 10
    lr_adamw: float = 1e-4
    lr_sgd: float = 1e-3
    weight_decay: float = 1e-2
    batch_size: int = 32
    warmup_steps: int = None
    min_lr: float = 1e-6
    restart_period: int = 2
    seed: int = 0
    uncertainty_weight: float = 1.0
    clip_norm: float = 1.0
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    momentum: float = 0.9

    PRESETS = {
        'desk': dict(),
        'paper': dict(epochs_adamw=40, epochs_sgd=40, batch_size=1024),
    }

    def __post_init__(self):
        object.__setattr__(self, 'betas', tuple(self.betas))

        if self.epochs_adamw < 0 or self.epochs_sgd < 0 or self.epochs_adamw + self.epochs_sgd == 0:
            raise ConfigError('train: need at least one epoch, got %d+%d' % (
                self.epochs_adamw, self.epochs_sgd))

        for name in ('lr_adamw', 'lr_sgd', 'batch_size', 'min_lr', 'restart_period', 'clip_norm'):
            if getattr(self, name) <= 0:
                raise ConfigError('train: %s must be positive' % name)

        if self.weight_decay < 0 or self.uncertainty_weight < 0:
            raise ConfigError('train: weight_decay and uncertainty_weight must be non-negative')

        if self.warmup_steps is not None and self.warmup_steps < 0:
            raise ConfigError('train: warmup_steps must be non-negative')

    @classmethod
    def preset(cls, name, **overrides):
        try:
            values = dict(cls.PRESETS[name])
        except KeyError:
            raise ConfigError('unknown preset %r' % name)

        values.update(overrides)
        return cls(**values)


def snapshot(*configs):
    return {type(i).__name__: asdict(i) for i in configs}



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
Bird's-eye-view rasterization of a Scene.

Forward (+x) points up the image, left (+y) points to the image left. Pixel
(row, col) covers the point ((ego_row - row) * mpp, (ego_col - col) * mpp).
Coverage is binary, so rasters are bitwise reproducible.
"""
from enum import IntEnum

import numpy as np

from trajformer.config import RasterConfig
from trajformer.errors import ConfigError
from trajformer.scenegen import (
    AgentKind, LightState, MapElementKind, MAX_SPEED, PEDESTRIAN_RADIUS, VEHICLE_SIZE
)


class Channel(IntEnum):
    TARGET = 0
    TARGET_PAST_5 = 1
    TARGET_PAST_10 = 2
    TARGET_PAST_20 = 3
    AGENTS = 4
    SPEED = 5
    YAW = 6
    LANES = 7
    ROAD_BOUNDARIES = 8
    CROSSWALKS = 9
    TRAFFIC_LIGHTS = 10
    SPEED_LIMIT = 11


PAST_CHANNELS = {
    Channel.TARGET_PAST_5: 5,
    Channel.TARGET_PAST_10: 10,
    Channel.TARGET_PAST_20: 20,
}

LIGHT_VALUES = {
    LightState.RED: 1.0,
    LightState.YELLOW: 0.5,
    LightState.GREEN: 0.25,
    LightState.UNKNOWN: 0.0,
}


class RasterTensor:
    def __init__(self, data, meters_per_pixel, ego_pixel):
        self.data = data
        self.meters_per_pixel = meters_per_pixel
        self.ego_pixel = tuple(ego_pixel)

    @property
    def channels(self):
        return self.data.shape[0]

    @property
    def height(self):
        return self.data.shape[1]

    @property
    def width(self):
        return self.data.shape[2]

    def __str__(self):
        return '<%s: %dx%dx%d, %.2f m/px, ego=%s>' % (
            type(self).__name__,
            self.channels, self.height, self.width,
            self.meters_per_pixel,
            self.ego_pixel)


class _Canvas:
    def __init__(self, config):
        self.config = config
        self.data = np.zeros((config.channels, config.height, config.width), dtype=np.float32)

        row, col = config.ego_pixel
        rows, cols = np.mgrid[0:config.height, 0:config.width]
        self.x = (row - rows) * config.meters_per_pixel
        self.y = (col - cols) * config.meters_per_pixel

    def footprint(self, position, yaw, kind):
        dx, dy = self.x - position[0], self.y - position[1]

        if kind == AgentKind.PEDESTRIAN:
            return dx ** 2 + dy ** 2 <= PEDESTRIAN_RADIUS ** 2

        cos, sin = np.cos(yaw), np.sin(yaw)
        length, width = VEHICLE_SIZE
        along = dx * cos + dy * sin
        across = -dx * sin + dy * cos
        return (np.abs(along) <= length / 2) & (np.abs(across) <= width / 2)

    def fill(self, channel, mask, value=1.0):
        self.data[channel][mask] = value

    def polyline(self, channel, points, value=1.0):
        config = self.config
        points = np.asarray(points, dtype=np.float64)
        step = config.meters_per_pixel / 2

        for start, end in zip(points[:-1], points[1:]):
            count = int(np.ceil(np.hypot(*(end - start)) / step)) + 1
            samples = start + np.linspace(0.0, 1.0, count)[:, None] * (end - start)

            rows = np.rint(config.ego_pixel[0] - samples[:, 0] / config.meters_per_pixel).astype(int)
            cols = np.rint(config.ego_pixel[1] - samples[:, 1] / config.meters_per_pixel).astype(int)
            inside = (rows >= 0) & (rows < config.height) & (cols >= 0) & (cols < config.width)

            plane = self.data[channel]
            plane[rows[inside], cols[inside]] = np.maximum(plane[rows[inside], cols[inside]], value)


def rasterize(scene, config=None):
    config = config or RasterConfig()

    if not isinstance(config, RasterConfig):
        raise ConfigError('rasterize: expected RasterConfig, got %r' % (config, ))

    canvas = _Canvas(config)

    for index, agent in enumerate(scene.agents):
        mask = canvas.footprint(agent.position, agent.yaw, agent.kind)

        if index == 0:
            canvas.fill(Channel.TARGET, mask)

            for channel, steps in PAST_CHANNELS.items():
                if steps <= scene.history.shape[1]:
                    x, y, yaw = scene.history[0, -steps]
                    canvas.fill(channel, canvas.footprint((x, y), yaw, agent.kind))
        else:
            canvas.fill(Channel.AGENTS, mask)

        canvas.fill(Channel.SPEED, mask, min(agent.speed / MAX_SPEED, 1.0))
        canvas.fill(Channel.YAW, mask, (agent.yaw / np.pi + 1.0) / 2)

    for element in scene.map:
        if element.kind == MapElementKind.LANE:
            canvas.polyline(Channel.LANES, element.polyline)
            canvas.polyline(Channel.SPEED_LIMIT, element.polyline,
                            min(element.speed_limit / MAX_SPEED, 1.0))
        elif element.kind == MapElementKind.ROAD_BOUNDARY:
            canvas.polyline(Channel.ROAD_BOUNDARIES, element.polyline)
        elif element.kind == MapElementKind.CROSSWALK:
            canvas.polyline(Channel.CROSSWALKS, element.polyline)

    for light in scene.lights:
        value = LIGHT_VALUES[light.state]

        if 0 <= light.lane < len(scene.map) and scene.map[light.lane].kind == MapElementKind.LANE:
            canvas.polyline(Channel.TRAFFIC_LIGHTS, scene.map[light.lane].polyline, value)
        else:
            canvas.polyline(Channel.TRAFFIC_LIGHTS, [light.position, light.position], value)

    return RasterTensor(canvas.data, config.meters_per_pixel, config.ego_pixel)


def rasterize_batch(scenes, config=None):
    return np.stack([rasterize(i, config).data for i in scenes])

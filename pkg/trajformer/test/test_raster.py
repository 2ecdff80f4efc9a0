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

from pytest import fixture, raises

from trajformer.config import RasterConfig
from trajformer.errors import ConfigError
from trajformer.raster import Channel, rasterize, rasterize_batch
from trajformer.scenegen import (
    Agent, AgentKind, GroundTruthTrajectory, LightState, MapElement, MapElementKind, Scene,
    ScenarioKind, TrafficLight, generate_scene
)


def make_scene(agents=(), elements=(), lights=(), history=None):
    agents = list(agents)
    if history is None:
        history = np.zeros((len(agents), 25, 3))

    return Scene(agents, list(elements), list(lights), history,
                 GroundTruthTrajectory(np.zeros((25, 2))), ScenarioKind.STRAIGHT, 0)


def vehicle(x=0.0, y=0.0, yaw=0.0, speed=0.0, kind=AgentKind.VEHICLE):
    return Agent((x, y), (speed, 0.0), (0.0, 0.0), yaw, kind)


@fixture
def config():
    return RasterConfig()


def test_target_at_origin_marks_ego_pixel(config):
    raster = rasterize(make_scene([vehicle()]), config)

    assert raster.data[Channel.TARGET][config.ego_pixel] == 1.0


def test_empty_scene_is_all_zero(config):
    raster = rasterize(make_scene(), config)

    assert raster.data.shape == (12, 64, 64)
    assert not raster.data.any()


def test_footprint_ten_meters_forward(config):
    raster = rasterize(make_scene([vehicle(x=10.0)]), config)
    rows, cols = np.nonzero(raster.data[Channel.TARGET])

    assert rows.mean() == pytest.approx(config.ego_pixel[0] - 20)
    assert cols.mean() == pytest.approx(config.ego_pixel[1])


def test_left_is_image_left(config):
    raster = rasterize(make_scene([vehicle(x=100.0), vehicle(y=5.0)]), config)
    _, cols = np.nonzero(raster.data[Channel.AGENTS])

    assert cols.mean() == pytest.approx(config.ego_pixel[1] - 10)


def test_agent_outside_extent_is_clipped(config):
    history = np.zeros((2, 25, 3))
    history[0, :, 0] = 500.0
    history[1, :, :2] = (-500.0, 300.0)
    raster = rasterize(make_scene([vehicle(x=500.0), vehicle(x=-500.0, y=300.0)],
                                  history=history), config)

    assert not raster.data.any()


def test_values_in_unit_range():
    for seed, kind in enumerate(ScenarioKind):
        data = rasterize(generate_scene(seed, kind, 1.0)).data

        assert data.min() >= 0.0
        assert data.max() <= 1.0
        assert data.dtype == np.float32


def test_speed_and_yaw_channels(config):
    raster = rasterize(make_scene([vehicle(speed=15.0, yaw=-math.pi / 2)]), config)
    mask = raster.data[Channel.TARGET] > 0

    assert np.allclose(raster.data[Channel.SPEED][mask], 0.5)
    assert np.allclose(raster.data[Channel.YAW][mask], 0.25)


def test_history_channels(config):
    history = np.zeros((1, 25, 3))
    history[0, :, 0] = np.arange(-25, 0) * 0.2
    raster = rasterize(make_scene([vehicle()], history=history), config)

    for channel, steps in ((Channel.TARGET_PAST_5, 5), (Channel.TARGET_PAST_10, 10),
                           (Channel.TARGET_PAST_20, 20)):
        rows, _ = np.nonzero(raster.data[channel])
        assert rows.mean() == pytest.approx(config.ego_pixel[0] + 0.4 * steps)


def test_pedestrian_footprint_is_small(config):
    raster = rasterize(make_scene([vehicle(x=100.0), vehicle(kind=AgentKind.PEDESTRIAN)]), config)

    assert 1 <= np.count_nonzero(raster.data[Channel.AGENTS]) <= 4


def test_map_channels(config):
    lane = MapElement(MapElementKind.LANE, [(-20.0, 0.0), (20.0, 0.0)],
                      direction=1, speed_limit=15.0, priority=True)
    boundary = MapElement(MapElementKind.ROAD_BOUNDARY, [(-20.0, 3.0), (20.0, 3.0)])
    crosswalk = MapElement(MapElementKind.CROSSWALK, [(5.0, -5.0), (5.0, 5.0)])
    light = TrafficLight((10.0, -2.0), LightState.YELLOW, lane=0)

    raster = rasterize(make_scene(elements=[lane, boundary, crosswalk], lights=[light]), config)
    column = raster.data[:, :, config.ego_pixel[1]]

    assert column[Channel.LANES].sum() > 0
    assert np.allclose(column[Channel.SPEED_LIMIT][column[Channel.LANES] > 0], 0.5)
    assert np.allclose(raster.data[Channel.TRAFFIC_LIGHTS][raster.data[Channel.LANES] > 0], 0.5)
    assert raster.data[Channel.ROAD_BOUNDARIES][:, config.ego_pixel[1] - 6].sum() > 0
    assert raster.data[Channel.CROSSWALKS][config.ego_pixel[0] - 10].sum() > 0


def test_light_without_lane_marks_its_position(config):
    light = TrafficLight((0.0, 0.0), LightState.RED)
    raster = rasterize(make_scene(lights=[light]), config)

    assert raster.data[Channel.TRAFFIC_LIGHTS][config.ego_pixel] == 1.0


def test_rasterize_rejects_invalid_config():
    with raises(ConfigError):
        rasterize(make_scene(), dict(height=64))

    with raises(ConfigError):
        RasterConfig(channels=3)

    with raises(ConfigError):
        RasterConfig(ego_pixel=(64, 0))


def test_rasterize_batch_stacks():
    scenes = [generate_scene(i, ScenarioKind.TURN, 0.2) for i in range(3)]
    batch = rasterize_batch(scenes)

    assert batch.shape == (3, 12, 64, 64)
    assert np.array_equal(batch[1], rasterize(scenes[1]).data)

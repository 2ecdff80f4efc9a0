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
Synthetic driving scenes in the prediction target's frame.

Geometry is laid out directly in the target frame: the target sits at the
origin heading along +x at t=0. History and future share the 5 Hz sampling
rate.
"""
import logging
import math

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from trajformer.seeds import derive_seed


DT = 0.2
HORIZON = 25
HISTORY = 25
MAX_SPEED = 30.0
MAX_STEP = MAX_SPEED * DT

LANE_WIDTH = 3.5
VEHICLE_SIZE = (4.5, 2.0)
PEDESTRIAN_RADIUS = 0.35

logger = logging.getLogger('trajformer.scenegen')


class AgentKind(IntEnum):
    VEHICLE = 0
    PEDESTRIAN = 1


class MapElementKind(IntEnum):
    LANE = 0
    ROAD_BOUNDARY = 1
    CROSSWALK = 2


class LightState(IntEnum):
    RED = 0
    YELLOW = 1
    GREEN = 2
    UNKNOWN = 3


class ScenarioKind(IntEnum):
    STRAIGHT = 0
    TURN = 1
    FORK = 2
    STOP = 3


TRAIN_KINDS = (ScenarioKind.STRAIGHT, ScenarioKind.TURN, ScenarioKind.FORK)
SHIFTED_KINDS = (ScenarioKind.STOP, )
SHIFTED_DIFFICULTY = 0.7


def wrap_angle(angle):
    return (angle + math.pi) % (2 * math.pi) - math.pi


def ego_transform(point, ego_pose):
    """
    Translate by -ego position, rotate by -ego yaw. ``point`` may be a single
    (x, y) or an array of them.
    """
    x, y, yaw = ego_pose
    cos, sin = math.cos(yaw), math.sin(yaw)
    point = np.asarray(point, dtype=np.float64)
    dx, dy = point[..., 0] - x, point[..., 1] - y

    return np.stack([cos * dx + sin * dy, -sin * dx + cos * dy], axis=-1)


@dataclass(frozen=True)
class Agent:
    position: tuple
    velocity: tuple
    acceleration: tuple
    yaw: float
    kind: AgentKind = AgentKind.VEHICLE

    def __post_init__(self):
        if not -math.pi <= self.yaw < math.pi:
            raise ValueError('yaw out of [-pi, pi): %s' % self.yaw)

    @property
    def speed(self):
        return math.hypot(*self.velocity)

    def __str__(self):
        return '<%s: %s at (%.1f, %.1f), %.1f m/s>' % (
            type(self).__name__,
            self.kind.name.lower(),
            self.position[0], self.position[1],
            self.speed)


@dataclass(eq=False)
class MapElement:
    kind: MapElementKind
    polyline: np.ndarray
    direction: int = None
    speed_limit: float = None
    priority: bool = None

    def __post_init__(self):
        self.polyline = np.asarray(self.polyline, dtype=np.float64).reshape(-1, 2)

        if len(self.polyline) < 2:
            raise ValueError('%s polyline needs at least 2 points' % self.kind.name)

        lane_attributes = (self.direction, self.speed_limit, self.priority)

        if self.kind == MapElementKind.LANE:
            if any(i is None for i in lane_attributes):
                raise ValueError('lane requires direction, speed limit and priority')
        elif any(i is not None for i in lane_attributes):
            raise ValueError('%s cannot carry lane attributes' % self.kind.name)

    def __eq__(self, other):
        return (self.kind == other.kind
                and np.array_equal(self.polyline, other.polyline)
                and (self.direction, self.speed_limit, self.priority) ==
                (other.direction, other.speed_limit, other.priority))


@dataclass(frozen=True)
class TrafficLight:
    position: tuple
    state: LightState
    lane: int = -1


@dataclass(eq=False)
class GroundTruthTrajectory:
    points: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 2)
        steps = np.diff(np.vstack([np.zeros((1, 2)), self.points]), axis=0)

        if np.hypot(steps[:, 0], steps[:, 1]).max(initial=0.0) > MAX_STEP + 1e-3:
            raise ValueError('trajectory step exceeds %.1f m' % MAX_STEP)

    def __len__(self):
        return len(self.points)

    def __eq__(self, other):
        return np.array_equal(self.points, other.points)


@dataclass(eq=False)
class Scene:
    agents: list
    map: list
    lights: list
    history: np.ndarray
    future: GroundTruthTrajectory
    scenario_kind: ScenarioKind
    seed: int
    difficulty: float = 0.0

    def __post_init__(self):
        history = np.asarray(self.history, dtype=np.float64)

        if history.size:
            self.history = history.reshape(len(self.agents), -1, 3)
        else:
            self.history = np.zeros((len(self.agents), HISTORY, 3))

    @property
    def target(self):
        return self.agents[0]

    def __eq__(self, other):
        return (self.seed == other.seed
                and self.scenario_kind == other.scenario_kind
                and self.difficulty == other.difficulty
                and self.agents == other.agents
                and self.map == other.map
                and self.lights == other.lights
                and np.array_equal(self.history, other.history)
                and self.future == other.future)

    def __str__(self):
        return '<%s: seed=%d, %s, difficulty=%.2f, agents=%d, map=%d, lights=%d>' % (
            type(self).__name__,
            self.seed,
            self.scenario_kind.name.lower(),
            self.difficulty,
            len(self.agents),
            len(self.map),
            len(self.lights))


class _Path:
    """
    Centerline parametrised by arc length; straight behind s=0, curvature
    profile ahead of it.
    """
    STEP = 0.05

    def __init__(self, curvature, length):
        s = np.arange(0.0, length + self.STEP, self.STEP)
        heading = np.concatenate([[0.0], np.cumsum(curvature(s[:-1] + self.STEP / 2)) * self.STEP])
        mid = (heading[:-1] + heading[1:]) / 2

        self.s = s
        self.heading = heading
        self.x = np.concatenate([[0.0], np.cumsum(np.cos(mid)) * self.STEP])
        self.y = np.concatenate([[0.0], np.cumsum(np.sin(mid)) * self.STEP])

    def __call__(self, s):
        s = np.asarray(s, dtype=np.float64)
        ahead = np.clip(s, 0.0, self.s[-1])
        behind = np.minimum(s, 0.0)
        x = np.interp(ahead, self.s, self.x) + behind
        y = np.interp(ahead, self.s, self.y)
        heading = np.interp(ahead, self.s, self.heading)
        return x, y, heading

    def offset(self, s, lateral):
        x, y, heading = self(s)
        return np.stack([x - lateral * np.sin(heading), y + lateral * np.cos(heading)], axis=-1)


def _arc_length(speed_at, times):
    """
    Arc length travelled from t=0 at each time, trapezoid over the 5 Hz grid.
    """
    times = np.asarray(times, dtype=np.float64)
    out = np.zeros_like(times)

    for sign in (1, -1):
        mask = times * sign > 0
        if not mask.any():
            continue

        grid = np.arange(0, int(round(np.abs(times[mask]).max() / DT)) + 1) * DT * sign
        speed = np.clip(speed_at(grid), 0.0, MAX_SPEED)
        travelled = np.concatenate([[0.0], np.cumsum((speed[:-1] + speed[1:]) / 2 * DT)]) * sign
        out[mask] = np.interp(times[mask] * sign, grid * sign, travelled * sign) * sign

    return out


def _smooth_noise(rng, scale):
    amplitude = rng.uniform(-scale, scale)
    wavelength = rng.uniform(15.0, 40.0)
    phase = rng.uniform(0, 2 * math.pi)
    return lambda s: np.where(s > 0, amplitude * np.sin(2 * math.pi * s / wavelength + phase), 0.0)


def _straight(s):
    return np.zeros_like(s)


class _Motion:
    """
    Target motion: speed profile over time, road curvature over arc length,
    driver deviation on top of the road, and alternative branches for forks.
    """
    def __init__(self, speed, road, deviation, branches=(), stop_distance=None):
        self.speed = speed
        self.road = road
        self.deviation = deviation
        self.branches = branches
        self.stop_distance = stop_distance

    def curvature(self, s):
        return self.road(s) + self.deviation(s)


def _target_motion(rng, kind, difficulty):
    deviation = _smooth_noise(rng, 0.02 * difficulty)

    if kind == ScenarioKind.STRAIGHT:
        speed0 = rng.uniform(4.0, 12.0) + difficulty * rng.uniform(0.0, 6.0)
        accel = difficulty * rng.uniform(-1.5, 1.5)
        return _Motion(lambda t: speed0 + accel * t, _straight, deviation)

    if kind == ScenarioKind.TURN:
        speed0 = rng.uniform(4.0, 10.0) + difficulty * rng.uniform(0.0, 4.0)
        accel = difficulty * rng.uniform(-1.0, 1.0)
        radius = rng.uniform(25.0, 60.0)
        sign = 1 if rng.integers(2) else -1
        start = rng.uniform(0.0, 8.0)
        end = start + (math.pi / 2) * radius

        def road(s):
            return np.where((s > start) & (s < end), sign / radius, 0.0)

        return _Motion(lambda t: speed0 + accel * t, road, deviation)

    if kind == ScenarioKind.FORK:
        speed0 = rng.uniform(6.0, 12.0) + difficulty * rng.uniform(0.0, 3.0)
        start = rng.uniform(2.0, 6.0)
        bend, half = 0.065, 10.0

        def branch(sign):
            def road(s):
                rising = (s > start) & (s <= start + half)
                falling = (s > start + half) & (s <= start + 2 * half)
                return sign * bend * (rising.astype(float) - falling.astype(float))
            return road

        branches = (branch(1), branch(-1))
        chosen = branches[int(rng.integers(2))]
        return _Motion(lambda t: np.full_like(t, speed0), chosen, deviation, branches)

    if kind == ScenarioKind.STOP:
        speed0 = rng.uniform(6.0, 12.0)
        distance = rng.uniform(12.0, 30.0)
        decel = speed0 ** 2 / (2 * distance) * (1.0 + difficulty * rng.uniform(-0.3, 0.3))

        def speed(t):
            return np.where(t > 0, np.maximum(speed0 - decel * t, 0.0), speed0)

        return _Motion(speed, _straight, deviation, stop_distance=distance)

    raise ValueError('unknown scenario kind %r' % kind)


def _lane_points(path, lo, hi, lateral=0.0, step=2.0):
    return path.offset(np.arange(lo, hi + step, step), lateral)


def _constant_velocity_past(position, yaw, speed, history):
    direction = np.array([math.cos(yaw), math.sin(yaw)])
    past = position + np.outer(np.arange(-history, 0) * DT * speed, direction)
    return direction * speed, past


def generate_scene(seed, scenario_kind, difficulty=0.0,
                   horizon=HORIZON, history=HISTORY):
    scenario_kind = ScenarioKind(scenario_kind)
    difficulty = float(np.clip(difficulty, 0.0, 1.0))
    rng = np.random.default_rng(seed)

    motion = _target_motion(rng, scenario_kind, difficulty)

    times = np.arange(-history, horizon + 1) * DT
    s = _arc_length(motion.speed, times)
    length = max(s.max(), 0.0) + 40.0
    path = _Path(motion.curvature, length)
    road = _Path(_straight if motion.branches else motion.road, length)

    x, y, heading = path(s)

    speed_now = float(np.clip(motion.speed(np.zeros(1)), 0.0, MAX_SPEED)[0])
    speed_next = float(np.clip(motion.speed(np.full(1, DT)), 0.0, MAX_SPEED)[0])

    agents = [Agent(position=(0.0, 0.0),
                    velocity=(speed_now, 0.0),
                    acceleration=((speed_next - speed_now) / DT, 0.0),
                    yaw=0.0)]
    histories = [np.column_stack([x, y, heading])[:history]]

    speed_limit = float(rng.choice([8.33, 13.9, 16.7]))
    lo, hi = min(s.min(), 0.0) - 10.0, length - 5.0
    elements = []

    for lane in (motion.branches or (motion.road, )):
        elements.append(MapElement(MapElementKind.LANE,
                                   _lane_points(_Path(lane, length), lo, hi),
                                   direction=1, speed_limit=speed_limit, priority=True))

    oncoming = bool(rng.integers(2))
    elements.append(MapElement(MapElementKind.LANE,
                               _lane_points(road, lo, hi, LANE_WIDTH),
                               direction=-1 if oncoming else 1,
                               speed_limit=speed_limit, priority=False))

    for lateral in (-LANE_WIDTH / 2, LANE_WIDTH * 1.5):
        elements.append(MapElement(MapElementKind.ROAD_BOUNDARY,
                                   _lane_points(road, lo, hi, lateral)))

    lights = []

    if motion.stop_distance is not None:
        stop_x = motion.stop_distance + 2.0 + VEHICLE_SIZE[0] / 2
        crosswalk = [(stop_x, -LANE_WIDTH), (stop_x + 4.0, -LANE_WIDTH),
                     (stop_x + 4.0, 2 * LANE_WIDTH), (stop_x, 2 * LANE_WIDTH),
                     (stop_x, -LANE_WIDTH)]
        elements.append(MapElement(MapElementKind.CROSSWALK, crosswalk))
        lights.append(TrafficLight((float(stop_x), -LANE_WIDTH), LightState.RED, 0))
    elif rng.uniform() < 0.5:
        weights = np.array([1.0 - 0.6 * difficulty, 0.3 * difficulty + 0.1, 0.3 * difficulty + 0.1])
        state = (LightState.GREEN, LightState.YELLOW, LightState.UNKNOWN)[
            int(rng.choice(3, p=weights / weights.sum()))]
        position = road.offset(length - 10.0, -LANE_WIDTH)
        lights.append(TrafficLight(tuple(float(i) for i in position), state, 0))

    for _ in range(int(rng.integers(0, 3 + int(4 * difficulty)))):
        along = rng.uniform(-10.0, 30.0)
        other_speed = rng.uniform(3.0, 14.0)
        _, _, lane_heading = road(along)
        yaw = float(wrap_angle(float(lane_heading) + (math.pi if oncoming else 0.0)))
        position = road.offset(along, LANE_WIDTH)
        velocity, past = _constant_velocity_past(position, yaw, other_speed, history)
        agents.append(Agent(position=tuple(float(i) for i in position),
                            velocity=tuple(float(i) for i in velocity),
                            acceleration=(0.0, 0.0),
                            yaw=yaw))
        histories.append(np.column_stack([past, np.full(history, yaw)]))

    if motion.stop_distance is not None:
        for _ in range(int(rng.integers(0, 2 + int(3 * difficulty)))):
            position = np.array([motion.stop_distance + 4.5 + rng.uniform(0.0, 4.0),
                                 rng.uniform(-LANE_WIDTH, 2 * LANE_WIDTH)])
            yaw = math.pi / 2 if rng.integers(2) else -math.pi / 2
            velocity, past = _constant_velocity_past(position, yaw, rng.uniform(0.8, 1.6), history)
            agents.append(Agent(position=tuple(float(i) for i in position),
                                velocity=tuple(float(i) for i in velocity),
                                acceleration=(0.0, 0.0),
                                yaw=yaw,
                                kind=AgentKind.PEDESTRIAN))
            histories.append(np.column_stack([past, np.full(history, yaw)]))

    future = np.column_stack([x, y])[history + 1:]

    return Scene(agents=agents,
                 map=elements,
                 lights=lights,
                 history=np.stack(histories),
                 future=GroundTruthTrajectory(future),
                 scenario_kind=scenario_kind,
                 seed=int(seed),
                 difficulty=difficulty)


@dataclass(frozen=True)
class SceneSpec:
    seed: int
    scenario_kind: ScenarioKind
    difficulty: float


def dataset_plan(count, seed_base=0, seed=0, shifted=False, kinds=None):
    """
    Seeds seed_base .. seed_base+count-1; the shifted split draws difficulty
    >= 0.7 from the kinds held out of training.
    """
    if kinds is None:
        kinds = SHIFTED_KINDS if shifted else TRAIN_KINDS

    kinds = [ScenarioKind(i) for i in kinds]
    rng = np.random.default_rng(derive_seed(seed, 'dataset/%d' % seed_base))
    low, high = (SHIFTED_DIFFICULTY, 1.0) if shifted else (0.0, 0.6)

    plan = []
    for index in range(count):
        kind = kinds[int(rng.integers(len(kinds)))]
        plan.append(SceneSpec(seed_base + index, kind, float(rng.uniform(low, high))))

    return plan


def generate_scenes(plan, workers=None):
    with ThreadPoolExecutor(max_workers=workers) as executor:
        scenes = list(executor.map(lambda i: generate_scene(i.seed, i.scenario_kind, i.difficulty),
                                   plan))

    logger.info('Generated %d scenes', len(scenes))
    return scenes

import logging
import os

from construct import (
    Array, Const, ConstructError, Flag, Float32l, Int8sl, Int8ul, Int32sl, Int32ul, Int64ul,
    Rebuild, Struct, len_, this
)

from trajformer.errors import ConfigError, EmptyDatasetError, MissingFileError
from trajformer.formats.util import EnumAdapter, Float32Array
from trajformer.scenegen import (
    Agent, AgentKind, GroundTruthTrajectory, LightState, MapElement, MapElementKind, Scene,
    ScenarioKind, TrafficLight, wrap_angle
)


logger = logging.getLogger('trajformer.dataset')


AgentRecord = Struct(
    "kind" / EnumAdapter(Int8ul, AgentKind),
    "position" / Float32l[2],
    "velocity" / Float32l[2],
    "acceleration" / Float32l[2],
    "yaw" / Float32l,
)

MapElementRecord = Struct(
    "kind" / EnumAdapter(Int8ul, MapElementKind),
    "direction" / Int8sl,
    "speed_limit" / Float32l,
    "priority" / Flag,
    "point_count" / Rebuild(Int32ul, len_(this.polyline)),
    "polyline" / Float32Array(this.point_count, 2),
)

TrafficLightRecord = Struct(
    "state" / EnumAdapter(Int8ul, LightState),
    "lane" / Int32sl,
    "position" / Float32l[2],
)

SceneRecord = Struct(
    "seed" / Int64ul,
    "scenario_kind" / EnumAdapter(Int8ul, ScenarioKind),
    "difficulty" / Float32l,
    "agent_count" / Rebuild(Int32ul, len_(this.agents)),
    "map_count" / Rebuild(Int32ul, len_(this.map)),
    "light_count" / Rebuild(Int32ul, len_(this.lights)),
    "history_length" / Rebuild(Int32ul, lambda this: this.history.shape[1]),
    "future_length" / Rebuild(Int32ul, len_(this.future)),
    "agents" / Array(this.agent_count, AgentRecord),
    "map" / Array(this.map_count, MapElementRecord),
    "lights" / Array(this.light_count, TrafficLightRecord),
    "history" / Float32Array(this.agent_count * this.history_length, 3),
    "future" / Float32Array(this.future_length, 2),
)

Dataset = Struct(
    "magic" / Const(b"SVMPDS1"),
    "count" / Rebuild(Int32ul, len_(this.scenes)),
    "scenes" / Array(this.count, SceneRecord),
)


def scene_to_record(scene):
    return dict(
        seed=scene.seed,
        scenario_kind=scene.scenario_kind,
        difficulty=scene.difficulty,
        agents=[dict(kind=i.kind,
                     position=list(i.position),
                     velocity=list(i.velocity),
                     acceleration=list(i.acceleration),
                     yaw=i.yaw) for i in scene.agents],
        map=[dict(kind=i.kind,
                  direction=i.direction or 0,
                  speed_limit=i.speed_limit or 0.0,
                  priority=bool(i.priority),
                  polyline=i.polyline) for i in scene.map],
        lights=[dict(state=i.state,
                     lane=i.lane,
                     position=list(i.position)) for i in scene.lights],
        history=scene.history,
        future=scene.future.points,
    )


def scene_from_record(record):
    agents = [Agent(position=tuple(i.position),
                    velocity=tuple(i.velocity),
                    acceleration=tuple(i.acceleration),
                    yaw=wrap_angle(i.yaw),
                    kind=i.kind) for i in record.agents]

    elements = []
    for i in record.map:
        if i.kind == MapElementKind.LANE:
            elements.append(MapElement(i.kind, i.polyline, direction=i.direction,
                                       speed_limit=i.speed_limit, priority=i.priority))
        else:
            elements.append(MapElement(i.kind, i.polyline))

    lights = [TrafficLight(tuple(i.position), i.state, i.lane) for i in record.lights]

    return Scene(agents=agents,
                 map=elements,
                 lights=lights,
                 history=record.history.reshape(record.agent_count, record.history_length, 3),
                 future=GroundTruthTrajectory(record.future),
                 scenario_kind=record.scenario_kind,
                 seed=record.seed,
                 difficulty=record.difficulty)


def write_dataset(path, scenes):
    Dataset.build_file(dict(scenes=[scene_to_record(i) for i in scenes]), path)
    logger.info('Wrote %d scenes to %s', len(scenes), path)


def read_dataset(path, allow_empty=True):
    if not os.path.exists(path):
        raise MissingFileError('dataset %s does not exist' % path)

    try:
        dataset = Dataset.parse_file(path)
    except ConstructError as ex:
        raise ConfigError('dataset %s is malformed: %s' % (path, ex))

    if not dataset.count and not allow_empty:
        raise EmptyDatasetError('dataset %s contains no scenes' % path)

    return [scene_from_record(i) for i in dataset.scenes]

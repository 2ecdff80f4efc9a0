import logging
import os

from collections import OrderedDict

import numpy as np

from construct import (
    Array, Const, ConstructError, ExprValidator, Int32ul, PascalString, Rebuild, Struct,
    len_, obj_, this
)

from trajformer.errors import ConfigError, MissingFileError
from trajformer.formats.util import Float32Tensor


VERSION = 1

logger = logging.getLogger('trajformer.checkpoint')


TensorRecord = Struct(
    "name" / PascalString(Int32ul, "utf8"),
    "rank" / Rebuild(Int32ul, len_(this.dims)),
    "dims" / Array(this.rank, Int32ul),
    "payload" / Float32Tensor(this.dims),
)

Checkpoint = Struct(
    "magic" / Const(b"SVMPCKPT"),
    "version" / ExprValidator(Int32ul, obj_ == VERSION),
    "count" / Rebuild(Int32ul, len_(this.tensors)),
    "tensors" / Array(this.count, TensorRecord),
)


def save_checkpoint(path, weights):
    tensors = []

    for name, tensor in weights.items():
        data = np.asarray(getattr(tensor, 'data', tensor), dtype=np.float32)
        tensors.append(dict(name=name, dims=list(data.shape), payload=data))

    Checkpoint.build_file(dict(version=VERSION, tensors=tensors), path)
    logger.info('Saved %d tensors to %s', len(tensors), path)


def load_checkpoint(path):
    if not os.path.exists(path):
        raise MissingFileError('checkpoint %s does not exist' % path)

    try:
        checkpoint = Checkpoint.parse_file(path)
    except ConstructError as ex:
        raise ConfigError('checkpoint %s is malformed: %s' % (path, ex))

    return OrderedDict((i.name, np.array(i.payload, dtype=np.float32)) for i in checkpoint.tensors)

import numpy as np

from construct import Adapter, Bytes, ValidationError


def EnumAdapter(subcon, enum):
    class _EnumAdapter(Adapter):
        def _decode(self, obj, context, path):
            if obj not in enum._value2member_map_:
                raise ValidationError("object failed validation: %s" % (obj,))
            return enum(obj)

        def _encode(self, obj, context, path):
            try:
                return enum(obj).value
            except ValueError:
                raise ValidationError("object failed validation: %s" % (obj,))

    return _EnumAdapter(subcon)


def _evaluate(value, context):
    return value(context) if callable(value) else value


class Float32ArrayAdapter(Adapter):
    """
    Little-endian f32 payload <-> numpy array of the given trailing shape.
    """
    def __init__(self, subcon, shape, dtype=np.float64):
        super().__init__(subcon)
        self.shape = shape
        self.dtype = dtype

    def _decode(self, obj, context, path):
        shape = _evaluate(self.shape, context)
        return np.frombuffer(obj, dtype='<f4').astype(self.dtype).reshape(shape)

    def _encode(self, obj, context, path):
        return np.ascontiguousarray(obj, dtype='<f4').tobytes()


def Float32Array(count, *trailing, dtype=np.float64):
    """
    ``count`` rows of ``trailing`` shape; ``count`` may be a context expression.
    """
    def size(context):
        return 4 * int(_evaluate(count, context)) * int(np.prod(trailing, dtype=np.int64))

    def shape(context):
        return (int(_evaluate(count, context)), ) + tuple(trailing)

    return Float32ArrayAdapter(Bytes(size), shape, dtype)


def Float32Tensor(dims):
    """
    Payload for a tensor whose dimensions are given by the ``dims`` expression.
    """
    def size(context):
        return 4 * int(np.prod(_evaluate(dims, context), dtype=np.int64))

    def shape(context):
        return tuple(_evaluate(dims, context))

    return Float32ArrayAdapter(Bytes(size), shape, np.float32)

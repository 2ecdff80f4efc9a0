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
Minimal reverse-mode differentiation over numpy arrays.

Every op returns a new Tensor holding its inputs and a closure mapping the
output gradient to input gradients. ``backward`` sorts the reachable graph
topologically and visits each node once.
"""
import math

from collections import namedtuple

import numpy as np

from trajformer.errors import NonFiniteError, NondeterministicError, ShapeError


DEFAULT_DTYPE = np.float32
LOG_FLOOR = -1e9

OpRecord = namedtuple('OpRecord', 'op inputs output')


class Tensor:
    def __init__(self, data, requires_grad=False, dtype=DEFAULT_DTYPE):
        self.data = np.array(data, dtype=dtype)
        self.requires_grad = requires_grad
        self.op = 'leaf'
        self.inputs = ()
        self.grad = None
        self._backward = None

    @classmethod
    def _from_op(cls, op, data, inputs, backward):
        data = np.asarray(data)

        if not np.isfinite(data).all():
            raise NonFiniteError('%s produced non-finite values' % op)

        tensor = cls.__new__(cls)
        tensor.data = data
        tensor.requires_grad = any(i.requires_grad for i in inputs)
        tensor.op = op
        tensor.inputs = tuple(inputs)
        tensor.grad = None
        tensor._backward = backward if tensor.requires_grad else None
        return tensor

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data.reshape(-1)[0])

    def astype(self, dtype):
        return Tensor(self.data, self.requires_grad, dtype=dtype)

    def detach(self):
        return detach(self)

    def __str__(self):
        return '<%s: op=%s, shape=%s, requires_grad=%s>' % (
            type(self).__name__,
            self.op,
            self.shape,
            self.requires_grad)

    __repr__ = __str__

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return slice(self, index)


def as_tensor(value, like=None):
    if isinstance(value, Tensor):
        return value

    if like is not None:
        return Tensor(value, dtype=like.dtype)

    if isinstance(value, np.ndarray) and value.dtype in (np.float32, np.float64):
        return Tensor(value, dtype=value.dtype)

    return Tensor(value, dtype=DEFAULT_DTYPE)


def _pair(a, b):
    if isinstance(a, Tensor):
        return a, as_tensor(b, like=a)

    b = as_tensor(b)
    return as_tensor(a, like=b), b


def _broadcast_shape(op, a, b):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(op, a.shape, b.shape)


def _unbroadcast(grad, shape):
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)

    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)

    return grad


def add(a, b):
    a, b = _pair(a, b)
    _broadcast_shape('add', a, b)

    def backward(grad):
        return _unbroadcast(grad, a.shape), _unbroadcast(grad, b.shape)

    return Tensor._from_op('add', a.data + b.data, (a, b), backward)


def sub(a, b):
    a, b = _pair(a, b)
    _broadcast_shape('sub', a, b)

    def backward(grad):
        return _unbroadcast(grad, a.shape), -_unbroadcast(grad, b.shape)

    return Tensor._from_op('sub', a.data - b.data, (a, b), backward)


def mul(a, b):
    a, b = _pair(a, b)
    _broadcast_shape('mul', a, b)

    def backward(grad):
        return (_unbroadcast(grad * b.data, a.shape),
                _unbroadcast(grad * a.data, b.shape))

    return Tensor._from_op('mul', a.data * b.data, (a, b), backward)


def neg(a):
    return mul(a, -1.0)


def matmul(a, b):
    a, b = _pair(a, b)

    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError('matmul', a.shape, b.shape)

    try:
        out = np.matmul(a.data, b.data)
    except ValueError:
        raise ShapeError('matmul', a.shape, b.shape)

    def backward(grad):
        grad_a = np.matmul(grad, np.swapaxes(b.data, -1, -2))
        grad_b = np.matmul(np.swapaxes(a.data, -1, -2), grad)
        return _unbroadcast(grad_a, a.shape), _unbroadcast(grad_b, b.shape)

    return Tensor._from_op('matmul', out, (a, b), backward)


def logsumexp(x, axis=-1, keepdims=False):
    x = as_tensor(x)
    peak = np.max(x.data, axis=axis, keepdims=True)
    shifted = np.exp(x.data - peak)
    total = shifted.sum(axis=axis, keepdims=True)
    out = peak + np.log(total)
    weights = shifted / total

    def backward(grad):
        if not keepdims:
            grad = np.expand_dims(grad, axis)
        return grad * weights,

    if not keepdims:
        out = np.squeeze(out, axis=axis)

    return Tensor._from_op('logsumexp', out, (x, ), backward)


def softmax(x, axis=-1):
    x = as_tensor(x)
    shifted = np.exp(x.data - np.max(x.data, axis=axis, keepdims=True))
    out = shifted / shifted.sum(axis=axis, keepdims=True)

    def backward(grad):
        return out * (grad - (grad * out).sum(axis=axis, keepdims=True)),

    return Tensor._from_op('softmax', out, (x, ), backward)


def layer_norm(x, axis=-1, eps=1e-5):
    x = as_tensor(x)
    mean = x.data.mean(axis=axis, keepdims=True)
    centered = x.data - mean
    inv_std = 1.0 / np.sqrt((centered ** 2).mean(axis=axis, keepdims=True) + eps)
    normed = centered * inv_std
    count = x.shape[axis]

    def backward(grad):
        total = grad.sum(axis=axis, keepdims=True)
        projected = (grad * normed).sum(axis=axis, keepdims=True)
        return inv_std * (grad - total / count - normed * projected / count),

    return Tensor._from_op('layer_norm', normed, (x, ), backward)


_GELU_SCALE = math.sqrt(2.0 / math.pi)


def gelu(x):
    x = as_tensor(x)
    inner = _GELU_SCALE * (x.data + 0.044715 * x.data ** 3)
    tanh = np.tanh(inner)
    out = 0.5 * x.data * (1.0 + tanh)

    def backward(grad):
        d_inner = _GELU_SCALE * (1.0 + 3 * 0.044715 * x.data ** 2)
        local = 0.5 * (1.0 + tanh) + 0.5 * x.data * (1.0 - tanh ** 2) * d_inner
        return grad * local,

    return Tensor._from_op('gelu', out, (x, ), backward)


def reshape(x, shape):
    x = as_tensor(x)

    try:
        out = x.data.reshape(shape)
    except ValueError:
        raise ShapeError('reshape', x.shape, shape)

    def backward(grad):
        return grad.reshape(x.shape),

    return Tensor._from_op('reshape', out, (x, ), backward)


def transpose(x, axes=None):
    x = as_tensor(x)
    axes = tuple(reversed(range(x.ndim))) if axes is None else tuple(axes)
    inverse = tuple(np.argsort(axes))

    def backward(grad):
        return np.transpose(grad, inverse),

    return Tensor._from_op('transpose', np.transpose(x.data, axes), (x, ), backward)


def concat(tensors, axis=-1):
    tensors = [as_tensor(i) for i in tensors]
    first = tensors[0]
    axis = axis % first.ndim

    for other in tensors[1:]:
        if other.ndim != first.ndim or any(
                i != j for n, (i, j) in enumerate(zip(first.shape, other.shape)) if n != axis):
            raise ShapeError('concat', first.shape, other.shape)

    bounds = np.cumsum([i.shape[axis] for i in tensors])[:-1]

    def backward(grad):
        return tuple(np.split(grad, bounds, axis=axis))

    return Tensor._from_op('concat', np.concatenate([i.data for i in tensors], axis=axis),
                           tensors, backward)


def slice(x, index):
    x = as_tensor(x)

    try:
        out = x.data[index]
    except IndexError:
        raise ShapeError('slice', x.shape, ())

    def backward(grad):
        full = np.zeros_like(x.data)
        full[index] += grad
        return full,

    return Tensor._from_op('slice', np.array(out), (x, ), backward)


def sum(x, axis=None, keepdims=False):
    x = as_tensor(x)

    def backward(grad):
        if axis is not None and not keepdims:
            grad = np.expand_dims(grad, axis)
        return np.broadcast_to(grad, x.shape).copy(),

    return Tensor._from_op('sum', x.data.sum(axis=axis, keepdims=keepdims), (x, ), backward)


def mean(x, axis=None, keepdims=False):
    x = as_tensor(x)
    count = x.size if axis is None else np.prod([x.shape[i] for i in np.atleast_1d(axis)])

    def backward(grad):
        if axis is not None and not keepdims:
            grad = np.expand_dims(grad, axis)
        return np.broadcast_to(grad / count, x.shape).copy(),

    return Tensor._from_op('mean', x.data.mean(axis=axis, keepdims=keepdims), (x, ), backward)


def log(x):
    x = as_tensor(x)
    positive = x.data > 0
    out = np.where(positive, np.log(np.where(positive, x.data, 1.0)), LOG_FLOOR)

    def backward(grad):
        return np.where(positive, grad / np.where(positive, x.data, 1.0), 0.0),

    return Tensor._from_op('log', out.astype(x.dtype), (x, ), backward)


def exp(x):
    x = as_tensor(x)
    out = np.exp(x.data)

    def backward(grad):
        return grad * out,

    return Tensor._from_op('exp', out, (x, ), backward)


def sqrt(x):
    x = as_tensor(x)
    out = np.sqrt(np.maximum(x.data, 0.0))

    def backward(grad):
        return np.where(out > 0, grad / (2.0 * np.where(out > 0, out, 1.0)), 0.0),

    return Tensor._from_op('sqrt', out, (x, ), backward)


def detach(x):
    x = as_tensor(x)
    return Tensor(x.data, dtype=x.dtype)


def scaled_dot_product_attention(q, k, v, heads):
    """
    softmax(Q K^T / sqrt(d_head)) V per head, heads concatenated.

    Inputs are (..., n, D); D must be divisible by ``heads``.
    """
    q, k, v = as_tensor(q), as_tensor(k), as_tensor(v)

    if (q.shape[-1] != k.shape[-1] or k.shape[:-1] != v.shape[:-1]
            or q.shape[-1] % heads or v.shape[-1] % heads):
        raise ShapeError('scaled_dot_product_attention', q.shape, k.shape, v.shape)

    def split(array):
        *lead, n, d = array.shape
        return np.moveaxis(array.reshape(*lead, n, heads, d // heads), -2, -3)

    def merge(array):
        *lead, h, n, d = array.shape
        return np.moveaxis(array, -3, -2).reshape(*lead, n, h * d)

    qh, kh, vh = split(q.data), split(k.data), split(v.data)
    scale = 1.0 / math.sqrt(qh.shape[-1])

    scores = np.matmul(qh, np.swapaxes(kh, -1, -2)) * scale
    scores = scores - scores.max(axis=-1, keepdims=True)
    weights = np.exp(scores)
    weights /= weights.sum(axis=-1, keepdims=True)

    out = merge(np.matmul(weights, vh))

    def backward(grad):
        grad = split(grad)
        grad_v = np.matmul(np.swapaxes(weights, -1, -2), grad)
        grad_weights = np.matmul(grad, np.swapaxes(vh, -1, -2))
        grad_scores = weights * (grad_weights - (grad_weights * weights).sum(axis=-1, keepdims=True))
        grad_q = np.matmul(grad_scores, kh) * scale
        grad_k = np.matmul(np.swapaxes(grad_scores, -1, -2), qh) * scale
        return merge(grad_q), merge(grad_k), merge(grad_v)

    return Tensor._from_op('attention', out.astype(q.dtype), (q, k, v), backward)


class Graph:
    def __init__(self, loss):
        self.loss = loss
        self.nodes = []
        self.gradients = {}
        self._order = self._toposort(loss)

        for tensor in self._order:
            self.nodes.append(OpRecord(tensor.op,
                                       tuple(id(i) for i in tensor.inputs),
                                       id(tensor)))

    @staticmethod
    def _toposort(loss):
        order = []
        visited = set()
        stack = [(loss, False)]

        while stack:
            tensor, expanded = stack.pop()

            if expanded:
                order.append(tensor)
                continue

            if id(tensor) in visited or not tensor.requires_grad:
                continue

            visited.add(id(tensor))
            stack.append((tensor, True))

            for parent in tensor.inputs:
                if id(parent) not in visited:
                    stack.append((parent, False))

        return order

    def run(self):
        grads = {id(self.loss): np.ones_like(self.loss.data)}

        for tensor in reversed(self._order):
            grad = grads.get(id(tensor))

            if grad is None:
                continue

            if tensor._backward is None:
                tensor.grad = grad
                self.gradients[tensor] = grad
                continue

            for parent, parent_grad in zip(tensor.inputs, tensor._backward(grad)):
                if not parent.requires_grad:
                    continue

                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + parent_grad
                else:
                    grads[key] = parent_grad

        return self

    def __getitem__(self, tensor):
        return self.gradients.get(tensor, np.zeros_like(tensor.data))

    def __str__(self):
        return '<%s: nodes=%d, leaves=%d>' % (
            type(self).__name__,
            len(self.nodes),
            len(self.gradients))


def backward(loss):
    if loss.size != 1:
        raise ShapeError('backward', loss.shape, ())

    return Graph(loss).run()


def grad_check(f, x, h=1e-3, elements=None, seed=0, reference=None):
    """
    Largest |analytic - central difference| / max(1, |analytic|) over the
    elements of ``x`` (or over ``elements`` elements picked with ``seed``).

    Both sides work on copies of ``x``. The differences come from
    ``reference`` evaluated at float64 when given, otherwise from ``f``.
    """
    first, second = f(x).data, f(x).data

    if not np.array_equal(first, second):
        raise NondeterministicError('grad_check: two forward calls differ')

    point = Tensor(x.data, requires_grad=True, dtype=x.dtype)
    analytic = backward(f(point))[point].reshape(-1)

    if reference is None:
        reference, dtype = f, x.dtype
    else:
        dtype = np.float64

    point = Tensor(np.ascontiguousarray(x.data), dtype=dtype)
    flat = point.data.reshape(-1)

    if elements is None or elements >= flat.size:
        indices = range(flat.size)
    else:
        indices = np.random.default_rng(seed).choice(flat.size, elements, replace=False)

    worst = 0.0

    for i in indices:
        original = flat[i]

        flat[i] = original + h
        upper, plus = float(flat[i]), reference(point).item()
        flat[i] = original - h
        lower, minus = float(flat[i]), reference(point).item()
        flat[i] = original

        numeric = (plus - minus) / (upper - lower)
        error = abs(float(analytic[i]) - numeric) / max(1.0, abs(float(analytic[i])))
        worst = max(worst, error)

    return worst

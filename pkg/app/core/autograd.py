"""Dense float64 tensors with reverse-mode automatic differentiation.

Every operation is a `Function` subclass: `forward` works on numpy arrays,
`backward` maps the gradient of the output to one gradient per input.
`Function.apply` records the call on the output tensor, so the graph is built
dynamically by the forward pass and released by `Tensor.backward`.

Shapes are explicit. Elementwise operations require identical shapes; the
only broadcast is a python scalar times a tensor (`scale`).
"""
import logging
import threading
from contextlib import contextmanager

import numpy as np

logger = logging.getLogger(__name__)

NORM_EPS = 1e-12

_grad_mode = threading.local()


class ShapeError(ValueError):
    """Operand shapes do not satisfy the operation's contract."""


class GraphError(RuntimeError):
    """The recorded graph cannot be differentiated as requested."""


class NonFiniteError(FloatingPointError):
    """An operation produced NaN or Inf."""


def is_grad_enabled():
    return getattr(_grad_mode, 'enabled', True)


@contextmanager
def no_grad():
    """Evaluate without recording operations, e.g. for inference."""
    previous = is_grad_enabled()
    _grad_mode.enabled = False
    try:
        yield
    finally:
        _grad_mode.enabled = previous


class Function:
    """Base class for differentiable operations."""

    def __init__(self, *inputs):
        self.inputs = inputs

    def forward(self, *arrays, **kwargs):
        raise NotImplementedError(f'{type(self).__name__}.forward')

    def backward(self, grad):
        raise NotImplementedError(f'{type(self).__name__}.backward')

    @classmethod
    def apply(cls, *inputs, **kwargs):
        """Run the forward pass and record it for backpropagation."""
        func = cls(*inputs)
        out = func.forward(*(t.data for t in inputs), **kwargs)
        if not np.all(np.isfinite(out)):
            names = ', '.join(t.name or f'<{t.shape}>' for t in inputs)
            raise NonFiniteError(
                f'{cls.__name__} produced a non-finite value '
                f'(inputs: {names})'
            )
        requires_grad = is_grad_enabled() and any(
            t.requires_grad for t in inputs
        )
        return Tensor(
            out,
            requires_grad=requires_grad,
            creator=func if requires_grad else None,
        )


class Tensor:
    """A float64 array, its gradient buffer and the op that produced it."""

    def __init__(self, data, requires_grad=False, name=None, creator=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad = None
        self.name = name
        self.creator = creator

    def __repr__(self):
        label = f' {self.name!r}' if self.name else ''
        return f'<Tensor{label} shape={self.shape}>'

    @property
    def shape(self):
        return self.data.shape

    @property
    def T(self):
        return transpose(self)

    def item(self):
        if self.data.size != 1:
            raise ShapeError(
                f'item() needs one element, shape is {self.shape}')
        return float(self.data.reshape(-1)[0])

    def zero_grad(self):
        self.grad = None

    def backward(self, retain_graph=False):
        """Populate `.grad` of every leaf reachable from this scalar.

        Gradients accumulate into existing buffers. Unless `retain_graph`
        is set the graph is released afterwards.
        """
        if self.data.size != 1:
            raise GraphError(
                f'backward() needs a scalar loss, got shape {self.shape}'
            )
        if not self.requires_grad:
            raise GraphError(
                'backward() on a tensor that does not require grad')

        order = _topological_order(self)
        pending = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            grad = pending.pop(id(node), None)
            if grad is None:
                continue
            if node.creator is None:
                node.grad = grad.copy() if node.grad is None \
                    else node.grad + grad
                continue
            input_grads = node.creator.backward(grad)
            for inp, inp_grad in zip(node.creator.inputs, input_grads):
                if inp_grad is None or not inp.requires_grad:
                    continue
                key = id(inp)
                if key in pending:
                    pending[key] = pending[key] + inp_grad
                else:
                    pending[key] = inp_grad

        if not retain_graph:
            for node in order:
                node.creator = None

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def _topological_order(root):
    """Post-order of the graph below `root`: inputs precede their consumers."""
    order, visited = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        if node.creator is not None:
            for inp in node.creator.inputs:
                if inp.requires_grad and id(inp) not in visited:
                    stack.append((inp, False))
    return order


def tensor(data, requires_grad=False, name=None):
    return Tensor(np.array(data, dtype=np.float64), requires_grad, name)


def constant(data):
    """A tensor that never receives gradients."""
    return Tensor(np.array(data, dtype=np.float64))


def _same_shape(op, a, b):
    if a.shape != b.shape:
        raise ShapeError(f'{op}: shapes {a.shape} and {b.shape} differ')


def _matrix(op, x):
    if x.ndim != 2:
        raise ShapeError(f'{op}: expected a matrix, got shape {x.shape}')


class Add(Function):
    def forward(self, a, b):
        _same_shape('add', a, b)
        return a + b

    def backward(self, grad):
        return grad, grad


class Sub(Function):
    def forward(self, a, b):
        _same_shape('sub', a, b)
        return a - b

    def backward(self, grad):
        return grad, -grad


class Mul(Function):
    def forward(self, a, b):
        _same_shape('mul', a, b)
        self.a, self.b = a, b
        return a * b

    def backward(self, grad):
        return grad * self.b, grad * self.a


class Scale(Function):
    def forward(self, x, factor):
        self.factor = float(factor)
        return x * self.factor

    def backward(self, grad):
        return (grad * self.factor,)


class MatMul(Function):
    def forward(self, a, b):
        _matrix('matmul', a)
        _matrix('matmul', b)
        if a.shape[1] != b.shape[0]:
            raise ShapeError(
                f'matmul: inner dimensions differ, {a.shape} x {b.shape}'
            )
        self.a, self.b = a, b
        return a @ b

    def backward(self, grad):
        return grad @ self.b.T, self.a.T @ grad


class Transpose(Function):
    def forward(self, x):
        _matrix('transpose', x)
        return x.T.copy()

    def backward(self, grad):
        return (grad.T,)


class Sum(Function):
    def forward(self, x):
        self.shape = x.shape
        return np.asarray(x.sum())

    def backward(self, grad):
        return (np.full(self.shape, float(grad)),)


class Mean(Function):
    def forward(self, x, axis):
        _matrix('mean', x)
        self.shape, self.axis = x.shape, axis
        return x.mean(axis=axis, keepdims=True)

    def backward(self, grad):
        count = self.shape[self.axis]
        return (np.broadcast_to(grad / count, self.shape).copy(),)


class Concat(Function):
    def forward(self, *arrays, axis):
        for arr in arrays:
            _matrix('concat', arr)
        self.axis = axis
        self.bounds = np.cumsum([arr.shape[axis] for arr in arrays])[:-1]
        return np.concatenate(arrays, axis=axis)

    def backward(self, grad):
        return tuple(np.split(grad, self.bounds, axis=self.axis))


class Exp(Function):
    def forward(self, x):
        self.out = np.exp(x)
        return self.out

    def backward(self, grad):
        return (grad * self.out,)


class Log(Function):
    def forward(self, x):
        self.x = x
        with np.errstate(divide='ignore', invalid='ignore'):
            return np.log(x)

    def backward(self, grad):
        return (grad / self.x,)


class Slice(Function):
    def forward(self, x, axis, start, stop):
        _matrix('slice', x)
        if not 0 <= start <= stop <= x.shape[axis]:
            raise ShapeError(
                f'slice: [{start}:{stop}] out of range for axis {axis} '
                f'of shape {x.shape}'
            )
        self.shape = x.shape
        self.index = (slice(start, stop),) if axis == 0 \
            else (slice(None), slice(start, stop))
        return x[self.index].copy()

    def backward(self, grad):
        full = np.zeros(self.shape)
        full[self.index] = grad
        return (full,)


class TakeRows(Function):
    def forward(self, table, ids):
        _matrix('take_rows', table)
        ids = np.asarray(ids, dtype=np.int64)
        if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
            raise ShapeError(
                f'take_rows: ids outside [0, {table.shape[0]})'
            )
        self.shape, self.ids = table.shape, ids
        return table[ids]

    def backward(self, grad):
        full = np.zeros(self.shape)
        np.add.at(full, self.ids, grad)
        return (full,)


class SoftmaxRows(Function):
    def forward(self, x):
        _matrix('softmax_rows', x)
        shifted = np.exp(x - x.max(axis=1, keepdims=True))
        self.out = shifted / shifted.sum(axis=1, keepdims=True)
        return self.out

    def backward(self, grad):
        y = self.out
        return (y * (grad - (grad * y).sum(axis=1, keepdims=True)),)


class LogSoftmaxRows(Function):
    def forward(self, x):
        _matrix('log_softmax_rows', x)
        shifted = x - x.max(axis=1, keepdims=True)
        self.out = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        return self.out

    def backward(self, grad):
        probs = np.exp(self.out)
        return (grad - probs * grad.sum(axis=1, keepdims=True),)


class L2NormalizeRows(Function):
    def forward(self, x):
        _matrix('l2_normalize_rows', x)
        norms = np.linalg.norm(x, axis=1, keepdims=True)
        self.live = norms >= NORM_EPS
        self.norms = np.where(self.live, norms, 1.0)
        self.out = np.where(self.live, x / self.norms, x)
        return self.out

    def backward(self, grad):
        y = self.out
        radial = (grad * y).sum(axis=1, keepdims=True)
        projected = (grad - y * radial) / self.norms
        return (np.where(self.live, projected, grad),)


def add(a, b):
    return Add.apply(a, b)


def sub(a, b):
    return Sub.apply(a, b)


def mul(a, b):
    return Mul.apply(a, b)


def scale(x, factor):
    return Scale.apply(x, factor=factor)


def matmul(a, b):
    return MatMul.apply(a, b)


def transpose(x):
    return Transpose.apply(x)


def total(x):
    """Sum of all entries as a scalar tensor."""
    return Sum.apply(x)


def mean(x, axis=0):
    """Mean over `axis`, keeping it as a length-one dimension."""
    return Mean.apply(x, axis=axis)


def concat(tensors, axis=0):
    return Concat.apply(*tensors, axis=axis)


def exp(x):
    return Exp.apply(x)


def log(x):
    return Log.apply(x)


def slice_rows(x, start, stop):
    return Slice.apply(x, axis=0, start=start, stop=stop)


def slice_cols(x, start, stop):
    return Slice.apply(x, axis=1, start=start, stop=stop)


def take_rows(table, ids):
    """Gather rows of `table`; repeated ids accumulate their gradients."""
    return TakeRows.apply(table, ids=ids)


def softmax_rows(x):
    return SoftmaxRows.apply(x)


def log_softmax_rows(x):
    return LogSoftmaxRows.apply(x)


def l2_normalize_rows(x):
    """Unit-norm rows; rows with norm below 1e-12 pass through unchanged."""
    return L2NormalizeRows.apply(x)


def ones(rows, cols):
    return constant(np.ones((rows, cols)))


def eye(size):
    return constant(np.eye(size))

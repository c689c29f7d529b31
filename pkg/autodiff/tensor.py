"""Dense N-dimensional tensor with tape-recorded reverse-mode gradients.

Every tensor produced by an operation records its parents, a backward
closure and a creation sequence number. The sequence number is the tape:
walking reachable nodes in decreasing sequence order visits every node
after all of its consumers, which is all reverse mode needs.
"""

import itertools
import logging
import threading
from contextlib import contextmanager
from typing import Callable, Optional, Sequence, Union

import numpy as np

from errors import DimensionError, UsageError

logger = logging.getLogger(__name__)

DEFAULT_DTYPE = np.float32

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

_sequence = itertools.count()
_grad_lock = threading.Lock()
_local = threading.local()


def is_recording() -> bool:
    return getattr(_local, "recording", True)


@contextmanager
def no_grad():
    """Disable graph recording for the current thread."""
    previous = is_recording()
    _local.recording = False
    try:
        yield
    finally:
        _local.recording = previous


def _as_array(data, dtype=None) -> np.ndarray:
    if dtype is not None:
        return np.asarray(data, dtype=dtype)
    if isinstance(data, (np.ndarray, np.generic)) and np.asarray(data).dtype.kind == "f":
        return np.asarray(data)
    return np.asarray(data, dtype=DEFAULT_DTYPE)


class Tensor:
    """Row-major real array with an optional gradient."""

    __slots__ = ("data", "requires_grad", "grad", "name", "_parents", "_backward", "_seq")

    def __init__(self, data, requires_grad: bool = False, name: str = "", dtype=None):
        array = _as_array(data, dtype)
        if any(extent == 0 for extent in array.shape):
            raise DimensionError(f"tensor extents must be positive, got {array.shape}")
        self.data: np.ndarray = array
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self._parents: tuple["Tensor", ...] = ()
        self._backward: Optional[BackwardFn] = None
        self._seq = next(_sequence)

    @classmethod
    def from_op(cls, data: np.ndarray, parents: Sequence["Tensor"], backward: BackwardFn) -> "Tensor":
        """Wrap an op result, recording it on the tape when any parent needs a gradient."""
        out = cls(data)
        if is_recording() and any(parent.requires_grad for parent in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def is_leaf(self) -> bool:
        return self._backward is None

    def item(self) -> float:
        if self.data.size != 1:
            raise DimensionError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return np.array(self.data, copy=True)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        backward(self)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(ensure_tensor(other), self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(ensure_tensor(other), self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(ensure_tensor(other), self)

    def __truediv__(self, other: float):
        if isinstance(other, Tensor):
            raise UsageError("tensor / tensor is not supported; use l2_normalize or mul")
        return mul(self, 1.0 / float(other))

    def __neg__(self):
        return neg(self)

    def __getitem__(self, index):
        return getitem(self, index)

    def sum(self, axis=None) -> "Tensor":
        return reduce_sum(self, axis)

    def mean(self) -> "Tensor":
        return reduce_sum(self) / self.size

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def flatten(self) -> "Tensor":
        return reshape(self, (-1,))


TensorLike = Union[Tensor, np.ndarray, float, int]


def ensure_tensor(value: TensorLike) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to `shape`."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


def add(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = ensure_tensor(a), ensure_tensor(b)

    def _backward(grad):
        return unbroadcast(grad, a.shape), unbroadcast(grad, b.shape)

    return Tensor.from_op(a.data + b.data, (a, b), _backward)


def sub(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = ensure_tensor(a), ensure_tensor(b)

    def _backward(grad):
        return unbroadcast(grad, a.shape), unbroadcast(-grad, b.shape)

    return Tensor.from_op(a.data - b.data, (a, b), _backward)


def mul(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = ensure_tensor(a), ensure_tensor(b)

    def _backward(grad):
        return unbroadcast(grad * b.data, a.shape), unbroadcast(grad * a.data, b.shape)

    return Tensor.from_op(a.data * b.data, (a, b), _backward)


def neg(a: Tensor) -> Tensor:
    return Tensor.from_op(-a.data, (a,), lambda grad: (-grad,))


def reduce_sum(a: Tensor, axis=None) -> Tensor:
    """Sum with float64 accumulation; the result keeps the input dtype."""
    out = np.asarray(a.data.sum(axis=axis, dtype=np.float64)).astype(a.dtype)
    axes = tuple(range(a.ndim)) if axis is None else tuple(int(ax) % a.ndim for ax in np.atleast_1d(axis))

    def _backward(grad):
        return (np.broadcast_to(np.expand_dims(grad, axes), a.shape).copy(),)

    return Tensor.from_op(out, (a,), _backward)


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    try:
        out = a.data.reshape(shape)
    except ValueError as exc:
        raise DimensionError(f"cannot reshape {a.shape} to {shape}") from exc
    return Tensor.from_op(out, (a,), lambda grad: (grad.reshape(a.shape),))


def getitem(a: Tensor, index) -> Tensor:
    out = np.array(a.data[index], copy=True)

    def _backward(grad):
        full = np.zeros(a.shape, dtype=np.result_type(grad, a.data))
        np.add.at(full, index, grad)
        return (full,)

    return Tensor.from_op(out, (a,), _backward)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise DimensionError("concat needs at least one tensor")
    out = np.concatenate([t.data for t in tensors], axis=axis)
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def _backward(grad):
        return tuple(np.split(grad, bounds, axis=axis))

    return Tensor.from_op(out, tuple(tensors), _backward)


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    return concat([t.reshape(t.shape[:axis] + (1,) + t.shape[axis:]) for t in tensors], axis=axis)


def _reachable(root: Tensor) -> list[Tensor]:
    seen: set[int] = set()
    nodes: list[Tensor] = []
    pending = [root]
    while pending:
        node = pending.pop()
        if id(node) in seen or not node.requires_grad:
            continue
        seen.add(id(node))
        nodes.append(node)
        pending.extend(node._parents)
    nodes.sort(key=lambda node: node._seq, reverse=True)
    return nodes


def _leaf_gradients(loss: Tensor) -> dict[int, tuple[Tensor, np.ndarray]]:
    if not loss.requires_grad:
        raise UsageError("backward called on a tensor with no recorded graph")
    if loss.size != 1:
        raise UsageError(f"backward needs a scalar loss, got shape {loss.shape}")

    pending: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data, dtype=np.float64)}
    leaves: dict[int, tuple[Tensor, np.ndarray]] = {}
    for node in _reachable(loss):
        grad = pending.pop(id(node), None)
        if grad is None:
            continue
        if node._backward is None:
            leaves[id(node)] = (node, grad)
            continue
        for parent, parent_grad in zip(node._parents, node._backward(grad)):
            if parent_grad is None or not parent.requires_grad:
                continue
            key = id(parent)
            pending[key] = pending[key] + parent_grad if key in pending else parent_grad
    return leaves


def gradients(loss: Tensor, wrt: Sequence[Tensor]) -> list[np.ndarray]:
    """Gradients of `loss` for each tensor in `wrt`, leaving `.grad` untouched."""
    leaves = _leaf_gradients(loss)
    result = []
    for tensor in wrt:
        entry = leaves.get(id(tensor))
        if entry is None:
            result.append(np.zeros_like(tensor.data))
        else:
            result.append(np.asarray(entry[1], dtype=tensor.dtype).reshape(tensor.shape))
    return result


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into `.grad` of every reachable leaf."""
    leaves = _leaf_gradients(loss)
    with _grad_lock:
        for node, grad in leaves.values():
            grad = np.asarray(grad, dtype=node.dtype).reshape(node.shape)
            node.grad = grad if node.grad is None else node.grad + grad
    logger.debug("backward populated %d leaf gradient(s)", len(leaves))

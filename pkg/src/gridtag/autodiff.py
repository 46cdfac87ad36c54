"""Dense float64 tensors with reverse-mode automatic differentiation.

Single-threaded and desk-scale by design: each op records its parents and
a backward closure; ``backward`` walks the implicit graph once in reverse
topological order.  Everything is 64-bit so gradient checks are limited
by the method, not the arithmetic.

Conventions that matter for reproducibility:
  * max reductions route gradient to the first maximal element,
  * dropout uses inverted scaling (divide by 1-p at train time) from an
    explicit ``numpy.random.Generator``,
  * graph traversal order depends only on construction order, so a fixed
    seed gives bit-identical runs.
"""

from __future__ import annotations

import json
from contextlib import contextmanager
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

Array = np.ndarray

_GRAD_ENABLED = True


@contextmanager
def no_grad():
    """Skip gradient recording inside the block (pure value computation)."""
    global _GRAD_ENABLED
    previous = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = previous


class ShapeError(ValueError):
    """Operands have incompatible shapes for an op."""


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        _parents: tuple["Tensor", ...] = (),
        _backward: Callable[[Array], None] | None = None,
    ):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: Array | None = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data.reshape(()))

    def _accumulate(self, grad: Array) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += grad

    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _result(data: Array, parents: Sequence[Tensor], backward) -> Tensor:
    """Wrap an op result; the backward closure is kept only when needed."""
    if not _GRAD_ENABLED or not any(p.requires_grad for p in parents):
        return Tensor(data)
    return Tensor(data, requires_grad=True, _parents=tuple(parents), _backward=backward)


def _unbroadcast(grad: Array, shape: tuple[int, ...]) -> Array:
    """Sum a broadcast gradient back down to the operand's shape."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(k for k, dim in enumerate(shape) if dim == 1 and grad.shape[k] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data + b.data
    except ValueError:
        raise ShapeError(f"add: cannot broadcast {a.shape} with {b.shape}") from None

    def backward(g: Array) -> None:
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.shape))

    return _result(data, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data * b.data
    except ValueError:
        raise ShapeError(f"mul: cannot broadcast {a.shape} with {b.shape}") from None

    def backward(g: Array) -> None:
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.shape))

    return _result(data, (a, b), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} @ {b.shape}")
    data = a.data @ b.data

    def backward(g: Array) -> None:
        if a.requires_grad:
            a._accumulate(g @ b.data.T)
        if b.requires_grad:
            b._accumulate(a.data.T @ g)

    return _result(data, (a, b), backward)


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise ShapeError(f"transpose: expected a matrix, got shape {a.shape}")

    def backward(g: Array) -> None:
        if a.requires_grad:
            a._accumulate(g.T)

    return _result(a.data.T, (a,), backward)


def concat(parts: Iterable[Tensor], axis: int = -1) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    if axis not in (0, -1):
        raise ShapeError("concat supports the first or last axis only")
    try:
        data = np.concatenate([p.data for p in parts], axis=axis)
    except ValueError:
        raise ShapeError(
            f"concat: incompatible shapes {[p.shape for p in parts]}"
        ) from None
    sizes = [p.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def backward(g: Array) -> None:
        moved = np.moveaxis(g, axis, 0)
        for p, lo, hi in zip(parts, offsets, offsets[1:]):
            if p.requires_grad:
                p._accumulate(np.moveaxis(moved[lo:hi], 0, axis))

    return _result(data, parts, backward)


def relu(a: Tensor) -> Tensor:
    a = as_tensor(a)
    data = np.maximum(a.data, 0.0)

    def backward(g: Array) -> None:
        if a.requires_grad:
            a._accumulate(g * (a.data > 0.0))

    return _result(data, (a,), backward)


def tanh(a: Tensor) -> Tensor:
    a = as_tensor(a)
    data = np.tanh(a.data)

    def backward(g: Array) -> None:
        if a.requires_grad:
            a._accumulate(g * (1.0 - data * data))

    return _result(data, (a,), backward)


def sigmoid(a: Tensor) -> Tensor:
    a = as_tensor(a)
    x = a.data
    data = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))

    def backward(g: Array) -> None:
        if a.requires_grad:
            a._accumulate(g * data * (1.0 - data))

    return _result(data, (a,), backward)


def row_softmax(a: Tensor) -> Tensor:
    """Softmax over the last axis; rows of the result sum to one."""
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    data = exp / exp.sum(axis=-1, keepdims=True)

    def backward(g: Array) -> None:
        if a.requires_grad:
            inner = (g * data).sum(axis=-1, keepdims=True)
            a._accumulate((g - inner) * data)

    return _result(data, (a,), backward)


def max_over_axis(a: Tensor, axis: int) -> Tensor:
    """Max reduction; gradient flows to the first maximal element only."""
    a = as_tensor(a)
    if not (-a.data.ndim <= axis < a.data.ndim):
        raise ShapeError(f"max_over_axis: axis {axis} out of range for {a.shape}")
    idx = np.expand_dims(a.data.argmax(axis=axis), axis)
    data = np.take_along_axis(a.data, idx, axis=axis).squeeze(axis)

    def backward(g: Array) -> None:
        if a.requires_grad:
            ga = np.zeros_like(a.data)
            np.put_along_axis(ga, idx, np.expand_dims(g, axis), axis=axis)
            a._accumulate(ga)

    return _result(data, (a,), backward)


def dropout(a: Tensor, p: float, train: bool, rng: np.random.Generator | None) -> Tensor:
    """Inverted dropout: scales by 1/(1-p) at train time, identity otherwise."""
    a = as_tensor(a)
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {p}")
    if not train or p == 0.0:
        return a
    if rng is None:
        raise ValueError("dropout at train time needs a random generator")
    mask = (rng.random(a.shape) >= p) / (1.0 - p)

    def backward(g: Array) -> None:
        if a.requires_grad:
            a._accumulate(g * mask)

    return _result(a.data * mask, (a,), backward)


def lookup(table: Tensor, index) -> Tensor:
    """Gather rows of `table` (axis 0) by an integer array of any shape."""
    table = as_tensor(table)
    index = np.asarray(index, dtype=np.int64)
    if index.size and (index.min() < 0 or index.max() >= table.shape[0]):
        raise ShapeError(
            f"lookup: index out of range for table with {table.shape[0]} rows"
        )
    data = table.data[index]

    def backward(g: Array) -> None:
        if table.requires_grad:
            gt = np.zeros_like(table.data)
            np.add.at(gt, index, g)
            table._accumulate(gt)

    return _result(data, (table,), backward)


def take_per_row(a: Tensor, cols) -> Tensor:
    """Pick one column per row: result[r] = a[r, cols[r]]."""
    a = as_tensor(a)
    cols = np.asarray(cols, dtype=np.int64)
    if a.data.ndim != 2 or cols.shape != (a.shape[0],):
        raise ShapeError(f"take_per_row: shapes {a.shape} and {cols.shape}")
    rows = np.arange(a.shape[0])
    data = a.data[rows, cols]

    def backward(g: Array) -> None:
        if a.requires_grad:
            ga = np.zeros_like(a.data)
            np.add.at(ga, (rows, cols), g)
            a._accumulate(ga)

    return _result(data, (a,), backward)


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    a = as_tensor(a)
    data = a.data.reshape(shape)

    def backward(g: Array) -> None:
        if a.requires_grad:
            a._accumulate(g.reshape(a.shape))

    return _result(data, (a,), backward)


def pad_rows(a: Tensor, before: int, after: int) -> Tensor:
    """Zero rows prepended/appended along axis 0."""
    a = as_tensor(a)
    widths = ((before, after),) + ((0, 0),) * (a.data.ndim - 1)
    data = np.pad(a.data, widths)

    def backward(g: Array) -> None:
        if a.requires_grad:
            a._accumulate(g[before : before + a.shape[0]])

    return _result(data, (a,), backward)


def log(a: Tensor) -> Tensor:
    a = as_tensor(a)
    data = np.log(a.data)

    def backward(g: Array) -> None:
        if a.requires_grad:
            a._accumulate(g / a.data)

    return _result(data, (a,), backward)


def clamp_min(a: Tensor, lo: float) -> Tensor:
    """Elementwise max(a, lo); gradient is blocked where clamping bites."""
    a = as_tensor(a)
    data = np.maximum(a.data, lo)

    def backward(g: Array) -> None:
        if a.requires_grad:
            a._accumulate(g * (a.data >= lo))

    return _result(data, (a,), backward)


def total(a: Tensor) -> Tensor:
    """Sum of all elements, as a scalar tensor."""
    a = as_tensor(a)
    data = np.asarray(a.data.sum())

    def backward(g: Array) -> None:
        if a.requires_grad:
            a._accumulate(np.broadcast_to(g, a.shape).copy())

    return _result(data, (a,), backward)


def _topo_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in visited:
                stack.append((parent, False))
    return order


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into every reachable leaf's ``grad``.

    Each recorded node is visited exactly once, children before parents.
    """
    if loss.data.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    loss.grad = np.ones_like(loss.data)
    for node in reversed(_topo_order(loss)):
        if node._backward is not None:
            node._backward(node.grad)
            node.grad = None  # intermediate grads are not kept


CHECKPOINT_VERSION = 1


class ParamStore:
    """Named trainable tensors plus their accumulated gradients."""

    def __init__(self) -> None:
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, value: Array) -> Tensor:
        if name in self._params:
            raise ValueError(f"duplicate parameter name {name!r}")
        t = Tensor(np.array(value, dtype=np.float64), requires_grad=True)
        t.grad = np.zeros_like(t.data)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def names(self) -> list[str]:
        return list(self._params)

    def items(self) -> list[tuple[str, Tensor]]:
        return list(self._params.items())

    def zero_grad(self) -> None:
        for t in self._params.values():
            t.grad = np.zeros_like(t.data)

    def gradients(self) -> dict[str, Array]:
        return {name: t.grad.copy() for name, t in self._params.items()}

    def to_obj(self) -> dict:
        return {
            "version": CHECKPOINT_VERSION,
            "params": {
                name: {"shape": list(t.shape), "data": t.data.ravel().tolist()}
                for name, t in self._params.items()
            },
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "ParamStore":
        if obj.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {obj.get('version')!r}")
        store = cls()
        for name, rec in obj["params"].items():
            data = np.array(rec["data"], dtype=np.float64).reshape(rec["shape"])
            store.add(name, data)
        return store

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_obj()), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "ParamStore":
        return cls.from_obj(json.loads(Path(path).read_text(encoding="utf-8")))


def xavier_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> Array:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


def finite_diff_check(
    f: Callable[[], Tensor],
    store: ParamStore,
    eps: float = 1e-5,
    param_names: Sequence[str] | None = None,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``f`` rebuilds the forward graph from the store's current values and
    must be deterministic (dropout off).  The error for one parameter is
    |analytic - numeric| / max(|analytic|, |numeric|, 1e-8) with |.| the
    Euclidean norm over the parameter's elements; the max over parameters
    is returned.  Comparing whole-parameter norms keeps the check clear
    of float64 cancellation noise (about |f|*2^-52/eps per element) on
    elements whose true gradient is near zero.
    """
    names = list(param_names) if param_names is not None else store.names()
    store.zero_grad()
    backward(f())
    analytic = {name: store[name].grad.copy() for name in names}

    worst = 0.0
    with no_grad():
        for name in names:
            param = store[name]
            numeric = np.zeros_like(param.data)
            for k in range(param.data.size):
                original = param.data.flat[k]
                param.data.flat[k] = original + eps
                up = f().item()
                param.data.flat[k] = original - eps
                down = f().item()
                param.data.flat[k] = original
                numeric.flat[k] = (up - down) / (2.0 * eps)
            a_norm = float(np.linalg.norm(analytic[name]))
            n_norm = float(np.linalg.norm(numeric))
            diff = float(np.linalg.norm(analytic[name] - numeric))
            worst = max(worst, diff / max(a_norm, n_norm, 1e-8))
    return worst

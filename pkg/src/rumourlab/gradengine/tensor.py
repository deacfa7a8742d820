"""Dense tensors with reverse-mode automatic differentiation.

Every primitive builds a node of the operation graph; backward() walks
the graph once in reverse topological order and accumulates gradients
into the leaves marked requires_grad. All arithmetic is float64.
"""

from __future__ import annotations

from typing import Iterable, Optional, Sequence

import numpy as np

from ..errors import ValidationError
from .sparse import SparseMatrix


class Tensor:
    """A numpy array plus the bookkeeping reverse mode needs."""

    __slots__ = ("values", "requires_grad", "grad", "name", "_parents", "_backward")

    def __init__(self, values, requires_grad=False, name=None, parents=(), backward=None):
        self.values = np.asarray(values, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self._parents: tuple[Tensor, ...] = tuple(parents)
        self._backward = backward

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    def item(self) -> float:
        return float(self.values.reshape(-1)[0])

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag})"

    # Arithmetic sugar; constants wrap into non-grad tensors.
    def __add__(self, other):
        return add(self, _wrap(other))

    def __radd__(self, other):
        return add(_wrap(other), self)

    def __mul__(self, other):
        return mul(self, _wrap(other))

    def __rmul__(self, other):
        return mul(_wrap(other), self)

    def __neg__(self):
        return mul(self, _wrap(-1.0))

    def __sub__(self, other):
        return add(self, -_wrap(other))

    def __rsub__(self, other):
        return add(_wrap(other), -self)

    def backward(self):
        backward(self)


def _wrap(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def parameter(values, name: str) -> Tensor:
    return Tensor(values, requires_grad=True, name=name)


def _needs_grad(*tensors: Tensor) -> bool:
    return any(t.requires_grad for t in tensors)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce a broadcast gradient back to the original operand shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _accumulate(tensor: Tensor, grad: np.ndarray) -> None:
    if tensor.grad is None:
        tensor.grad = np.zeros_like(tensor.values)
    tensor.grad += grad


def add(a: Tensor, b: Tensor) -> Tensor:
    try:
        values = a.values + b.values
    except ValueError:
        raise ValidationError(f"add: shapes {a.shape} and {b.shape} do not broadcast") from None
    out = Tensor(values, requires_grad=_needs_grad(a, b), parents=(a, b))

    def _back(grad):
        if a.requires_grad or a._parents:
            _accumulate(a, _unbroadcast(grad, a.shape))
        if b.requires_grad or b._parents:
            _accumulate(b, _unbroadcast(grad, b.shape))

    out._backward = _back
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    try:
        values = a.values * b.values
    except ValueError:
        raise ValidationError(f"mul: shapes {a.shape} and {b.shape} do not broadcast") from None
    out = Tensor(values, requires_grad=_needs_grad(a, b), parents=(a, b))

    def _back(grad):
        if a.requires_grad or a._parents:
            _accumulate(a, _unbroadcast(grad * b.values, a.shape))
        if b.requires_grad or b._parents:
            _accumulate(b, _unbroadcast(grad * a.values, b.shape))

    out._backward = _back
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.values.ndim != 2 or b.values.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValidationError(f"matmul: shapes {a.shape} and {b.shape} incompatible")
    out = Tensor(a.values @ b.values, requires_grad=_needs_grad(a, b), parents=(a, b))

    def _back(grad):
        if a.requires_grad or a._parents:
            _accumulate(a, grad @ b.values.T)
        if b.requires_grad or b._parents:
            _accumulate(b, a.values.T @ grad)

    out._backward = _back
    return out


def spmm(matrix: SparseMatrix, dense: Tensor) -> Tensor:
    """Sparse-constant times dense-tensor product; gradients flow to the
    dense operand only."""
    if dense.values.ndim != 2 or matrix.shape[1] != dense.shape[0]:
        raise ValidationError(
            f"spmm: shapes {matrix.shape} and {dense.shape} incompatible"
        )
    out = Tensor(
        matrix.matmul_dense(dense.values),
        requires_grad=dense.requires_grad or bool(dense._parents),
        parents=(dense,),
    )
    transposed = matrix.transpose()

    def _back(grad):
        _accumulate(dense, transposed.matmul_dense(grad))

    out._backward = _back
    return out


def relu(x: Tensor) -> Tensor:
    out = Tensor(np.maximum(x.values, 0.0), requires_grad=x.requires_grad or bool(x._parents), parents=(x,))

    def _back(grad):
        # Subgradient at exactly zero is zero.
        _accumulate(x, grad * (x.values > 0.0))

    out._backward = _back
    return out


def sigmoid(x: Tensor) -> Tensor:
    v = x.values
    values = np.where(v >= 0, 1.0 / (1.0 + np.exp(-np.abs(v))), np.exp(-np.abs(v)) / (1.0 + np.exp(-np.abs(v))))
    out = Tensor(values, requires_grad=x.requires_grad or bool(x._parents), parents=(x,))

    def _back(grad):
        _accumulate(x, grad * values * (1.0 - values))

    out._backward = _back
    return out


def tanh(x: Tensor) -> Tensor:
    values = np.tanh(x.values)
    out = Tensor(values, requires_grad=x.requires_grad or bool(x._parents), parents=(x,))

    def _back(grad):
        _accumulate(x, grad * (1.0 - values * values))

    out._backward = _back
    return out


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    if not tensors:
        raise ValidationError("concat: no inputs")
    values = np.concatenate([t.values for t in tensors], axis=axis)
    out = Tensor(values, requires_grad=_needs_grad(*tensors), parents=tuple(tensors))
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def _back(grad):
        pieces = np.split(grad, offsets[1:-1], axis=axis)
        for tensor, piece in zip(tensors, pieces):
            if tensor.requires_grad or tensor._parents:
                _accumulate(tensor, piece)

    out._backward = _back
    return out


def softmax_rows(x: Tensor) -> Tensor:
    if x.values.ndim != 2:
        raise ValidationError(f"softmax_rows: expected a 2-D tensor, got {x.shape}")
    shifted = x.values - x.values.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    values = exp / exp.sum(axis=1, keepdims=True)
    out = Tensor(values, requires_grad=x.requires_grad or bool(x._parents), parents=(x,))

    def _back(grad):
        dot = (grad * values).sum(axis=1, keepdims=True)
        _accumulate(x, values * (grad - dot))

    out._backward = _back
    return out


def segment_mean(x: Tensor, segment_ids: np.ndarray, num_segments: int) -> Tensor:
    """Mean of the rows of x per segment (e.g. per graph in a batch)."""
    segment_ids = np.asarray(segment_ids, dtype=int)
    if x.values.ndim != 2 or len(segment_ids) != x.shape[0]:
        raise ValidationError(
            f"segment_mean: {len(segment_ids)} ids for tensor of shape {x.shape}"
        )
    counts = np.bincount(segment_ids, minlength=num_segments)
    if (counts == 0).any():
        raise ValidationError("segment_mean: every segment needs at least one row")
    sums = np.zeros((num_segments, x.shape[1]))
    np.add.at(sums, segment_ids, x.values)
    values = sums / counts[:, None]
    out = Tensor(values, requires_grad=x.requires_grad or bool(x._parents), parents=(x,))

    def _back(grad):
        _accumulate(x, grad[segment_ids] / counts[segment_ids][:, None])

    out._backward = _back
    return out


def gather_rows(table: Tensor, ids: np.ndarray) -> Tensor:
    """Row lookup (embedding); gradients scatter-add into the table."""
    ids = np.asarray(ids, dtype=int)
    if table.values.ndim != 2:
        raise ValidationError(f"gather_rows: table must be 2-D, got {table.shape}")
    if len(ids) and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise ValidationError(
            f"gather_rows: id out of range for table with {table.shape[0]} rows"
        )
    out = Tensor(
        table.values[ids],
        requires_grad=table.requires_grad or bool(table._parents),
        parents=(table,),
    )

    def _back(grad):
        full = np.zeros_like(table.values)
        np.add.at(full, ids, grad)
        _accumulate(table, full)

    out._backward = _back
    return out


def mask_mul(x: Tensor, mask: np.ndarray) -> Tensor:
    """Multiply by a constant mask (zeroing or scaling positions)."""
    mask = np.asarray(mask, dtype=np.float64)
    try:
        values = x.values * mask
    except ValueError:
        raise ValidationError(f"mask_mul: mask {mask.shape} does not fit {x.shape}") from None
    out = Tensor(values, requires_grad=x.requires_grad or bool(x._parents), parents=(x,))

    def _back(grad):
        _accumulate(x, _unbroadcast(grad * mask, x.shape))

    out._backward = _back
    return out


def sum_all(x: Tensor) -> Tensor:
    out = Tensor(x.values.sum(), requires_grad=x.requires_grad or bool(x._parents), parents=(x,))

    def _back(grad):
        _accumulate(x, np.full_like(x.values, float(grad)))

    out._backward = _back
    return out


def mean_all(x: Tensor) -> Tensor:
    n = x.values.size
    out = Tensor(x.values.mean(), requires_grad=x.requires_grad or bool(x._parents), parents=(x,))

    def _back(grad):
        _accumulate(x, np.full_like(x.values, float(grad) / n))

    out._backward = _back
    return out


def _topological_order(root: Tensor) -> list[Tensor]:
    """Children-first ordering, iterative to cope with deep LSTM graphs."""
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
            if id(parent) not in visited:
                stack.append((parent, False))
    return order


def backward(loss: Tensor) -> None:
    """Populate .grad on every requires_grad tensor reachable from loss."""
    if loss.values.size != 1:
        raise ValidationError(f"backward needs a scalar loss, got shape {loss.shape}")
    order = _topological_order(loss)
    loss.grad = np.ones_like(loss.values)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


def collect_grads(params: dict[str, Tensor]) -> dict[str, np.ndarray]:
    """Gradients per named parameter; zeros for parameters the loss never
    touched."""
    return {
        name: (p.grad if p.grad is not None else np.zeros_like(p.values)).copy()
        for name, p in params.items()
    }


def zero_grads(params: Iterable[Tensor]) -> None:
    for p in params:
        p.grad = None

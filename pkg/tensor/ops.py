"""Element-wise, reduction and shape ops with their gradients."""
from __future__ import annotations

import builtins
from typing import Any, Optional, Sequence

import numpy as np

from tensor.tensor import Function, ShapeError, Tensor, as_tensor


class Add(Function):
    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        self.shapes = (a.shape, b.shape)
        return a + b

    def backward(self, grad: np.ndarray):
        return self.unbroadcast(grad, self.shapes[0]), self.unbroadcast(grad, self.shapes[1])


class Sub(Function):
    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        self.shapes = (a.shape, b.shape)
        return a - b

    def backward(self, grad: np.ndarray):
        return self.unbroadcast(grad, self.shapes[0]), self.unbroadcast(-grad, self.shapes[1])


class Mul(Function):
    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        self.a, self.b = a, b
        return a * b

    def backward(self, grad: np.ndarray):
        return (
            self.unbroadcast(grad * self.b, self.a.shape),
            self.unbroadcast(grad * self.a, self.b.shape),
        )


class Div(Function):
    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        self.a, self.b = a, b
        return a / b

    def backward(self, grad: np.ndarray):
        grad_a = grad / self.b
        grad_b = -grad * self.a / (self.b * self.b)
        return self.unbroadcast(grad_a, self.a.shape), self.unbroadcast(grad_b, self.b.shape)


class Neg(Function):
    def forward(self, a: np.ndarray) -> np.ndarray:
        return -a

    def backward(self, grad: np.ndarray):
        return (-grad,)


class Power(Function):
    def forward(self, a: np.ndarray, exponent: float) -> np.ndarray:
        self.a, self.exponent = a, exponent
        return a**exponent

    def backward(self, grad: np.ndarray):
        return (grad * self.exponent * self.a ** (self.exponent - 1),)


class Exp(Function):
    def forward(self, a: np.ndarray) -> np.ndarray:
        self.out = np.exp(a)
        return self.out

    def backward(self, grad: np.ndarray):
        return (grad * self.out,)


class Log(Function):
    def forward(self, a: np.ndarray) -> np.ndarray:
        self.a = a
        return np.log(a)

    def backward(self, grad: np.ndarray):
        return (grad / self.a,)


class Sqrt(Function):
    def forward(self, a: np.ndarray) -> np.ndarray:
        self.out = np.sqrt(a)
        return self.out

    def backward(self, grad: np.ndarray):
        return (grad / (2.0 * self.out),)


class Sum(Function):
    def forward(self, a: np.ndarray, axis: Any = None, keepdims: bool = False) -> np.ndarray:
        self.shape, self.axis, self.keepdims = a.shape, axis, keepdims
        return np.asarray(a.sum(axis=axis, keepdims=keepdims))

    def backward(self, grad: np.ndarray):
        if self.axis is not None and not self.keepdims:
            grad = np.expand_dims(grad, _normalize_axes(self.axis, len(self.shape)))
        return (np.broadcast_to(grad, self.shape).copy(),)


class Mean(Function):
    def forward(self, a: np.ndarray, axis: Any = None, keepdims: bool = False) -> np.ndarray:
        self.shape, self.axis, self.keepdims = a.shape, axis, keepdims
        axes = _normalize_axes(axis, a.ndim) if axis is not None else tuple(range(a.ndim))
        self.count = int(np.prod([a.shape[i] for i in axes])) if axes else 1
        return np.asarray(a.mean(axis=axis, keepdims=keepdims))

    def backward(self, grad: np.ndarray):
        if self.axis is not None and not self.keepdims:
            grad = np.expand_dims(grad, _normalize_axes(self.axis, len(self.shape)))
        return (np.broadcast_to(grad / self.count, self.shape).copy(),)


class Reshape(Function):
    def forward(self, a: np.ndarray, shape: Sequence[int]) -> np.ndarray:
        self.shape = a.shape
        try:
            return a.reshape(shape)
        except ValueError as exc:
            raise ShapeError(f"cannot reshape {a.shape} to {tuple(shape)}") from exc

    def backward(self, grad: np.ndarray):
        return (grad.reshape(self.shape),)


class Transpose(Function):
    def forward(self, a: np.ndarray, axes: Optional[Sequence[int]] = None) -> np.ndarray:
        self.axes = tuple(axes) if axes is not None else tuple(reversed(range(a.ndim)))
        return np.ascontiguousarray(np.transpose(a, self.axes))

    def backward(self, grad: np.ndarray):
        return (np.transpose(grad, np.argsort(self.axes)),)


class Concat(Function):
    def forward(self, *arrays: np.ndarray, axis: int = 0) -> np.ndarray:
        self.axis = axis
        self.sizes = [a.shape[axis] for a in arrays]
        try:
            return np.concatenate(arrays, axis=axis)
        except ValueError as exc:
            raise ShapeError(f"cannot concatenate shapes {[a.shape for a in arrays]} on axis {axis}") from exc

    def backward(self, grad: np.ndarray):
        splits = np.cumsum(self.sizes)[:-1]
        return tuple(np.split(grad, splits, axis=self.axis))


class GetItem(Function):
    def forward(self, a: np.ndarray, index: Any) -> np.ndarray:
        self.shape, self.index = a.shape, index
        return np.array(a[index], copy=True)

    def backward(self, grad: np.ndarray):
        full = np.zeros(self.shape, dtype=grad.dtype)
        if _is_basic_index(self.index):
            full[self.index] = grad
        else:
            np.add.at(full, self.index, grad)
        return (full,)


class Pad(Function):
    """Constant zero padding; ``widths`` is one (before, after) pair per axis."""

    def forward(self, a: np.ndarray, widths: Sequence[tuple[int, int]]) -> np.ndarray:
        self.slices = tuple(slice(lo, lo + n) for (lo, _), n in zip(widths, a.shape))
        return np.pad(a, widths)

    def backward(self, grad: np.ndarray):
        return (grad[self.slices],)


class Roll(Function):
    def forward(self, a: np.ndarray, shift: Sequence[int], axis: Sequence[int]) -> np.ndarray:
        self.shift, self.axis = tuple(shift), tuple(axis)
        return np.roll(a, self.shift, axis=self.axis)

    def backward(self, grad: np.ndarray):
        return (np.roll(grad, tuple(-s for s in self.shift), axis=self.axis),)


class Gather(Function):
    """Row lookup ``table[index]`` along axis 0, e.g. relative position bias."""

    def forward(self, table: np.ndarray, index: np.ndarray) -> np.ndarray:
        self.shape, self.index = table.shape, index
        return table[index]

    def backward(self, grad: np.ndarray):
        full = np.zeros(self.shape, dtype=grad.dtype)
        np.add.at(full, self.index, grad)
        return (full, None)


class MatMul(Function):
    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
            raise ShapeError(f"matmul dimension mismatch: {a.shape} @ {b.shape}")
        self.a, self.b = a, b
        try:
            return np.matmul(a, b)
        except ValueError as exc:
            raise ShapeError(f"matmul batch dims not broadcastable: {a.shape} @ {b.shape}") from exc

    def backward(self, grad: np.ndarray):
        grad_a = np.matmul(grad, np.swapaxes(self.b, -1, -2))
        grad_b = np.matmul(np.swapaxes(self.a, -1, -2), grad)
        return self.unbroadcast(grad_a, self.a.shape), self.unbroadcast(grad_b, self.b.shape)


def _is_basic_index(index: Any) -> bool:
    parts = index if isinstance(index, tuple) else (index,)
    return all(isinstance(p, (slice, int, type(Ellipsis), type(None))) for p in parts)


def _normalize_axes(axis: Any, ndim: int) -> tuple[int, ...]:
    axes = axis if isinstance(axis, (tuple, list)) else (axis,)
    return tuple(builtins.sorted(a % ndim for a in axes))


def add(a: Any, b: Any) -> Tensor:
    return Add.apply(a, b)


def sub(a: Any, b: Any) -> Tensor:
    return Sub.apply(a, b)


def mul(a: Any, b: Any) -> Tensor:
    return Mul.apply(a, b)


def div(a: Any, b: Any) -> Tensor:
    return Div.apply(a, b)


def neg(a: Tensor) -> Tensor:
    return Neg.apply(a)


def power(a: Tensor, exponent: float) -> Tensor:
    return Power.apply(a, exponent=exponent)


def exp(a: Tensor) -> Tensor:
    return Exp.apply(a)


def log(a: Tensor) -> Tensor:
    return Log.apply(a)


def sqrt(a: Tensor) -> Tensor:
    return Sqrt.apply(a)


def sum(a: Tensor, axis: Any = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    return Sum.apply(a, axis=axis, keepdims=keepdims)


def mean(a: Tensor, axis: Any = None, keepdims: bool = False) -> Tensor:
    return Mean.apply(a, axis=axis, keepdims=keepdims)


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    return Reshape.apply(a, shape=tuple(shape))


def transpose(a: Tensor, axes: Optional[Sequence[int]] = None) -> Tensor:
    return Transpose.apply(a, axes=axes)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise ShapeError("concat needs at least one tensor")
    return Concat.apply(*tensors, axis=axis)


def getitem(a: Tensor, index: Any) -> Tensor:
    return GetItem.apply(a, index=index)


def pad(a: Tensor, widths: Sequence[tuple[int, int]]) -> Tensor:
    if len(widths) != a.ndim:
        raise ShapeError(f"pad needs {a.ndim} width pairs, got {len(widths)}")
    return Pad.apply(a, widths=tuple(tuple(w) for w in widths))


def roll(a: Tensor, shift: Sequence[int], axis: Sequence[int]) -> Tensor:
    return Roll.apply(a, shift=shift, axis=axis)


def gather(table: Tensor, index: np.ndarray) -> Tensor:
    """Look up rows of ``table`` with an integer index array (the index is not differentiated)."""
    return Gather.apply(table, _IntConstant(np.asarray(index, dtype=np.int64)))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    return MatMul.apply(a, b)


class _IntConstant(Tensor):
    """Integer constant that bypasses the float cast of ``as_tensor``."""

    def __init__(self, data: np.ndarray):
        super().__init__(data, requires_grad=False, dtype=data.dtype)


def zeros(shape: Sequence[int], like: Optional[Tensor] = None) -> Tensor:
    return Tensor(np.zeros(tuple(shape)), dtype=like.dtype if like is not None else None)


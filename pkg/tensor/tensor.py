"""Tensor value type, differentiable Function base class and the gradient tape."""
from __future__ import annotations

import logging
import threading
from contextlib import contextmanager
from typing import Any, Iterator, Optional, Sequence, Union

import numpy as np

logger = logging.getLogger(__name__)

ArrayLike = Union[np.ndarray, float, int, Sequence[float], Sequence[Sequence[float]]]


class ShapeError(ValueError):
    """Raised when extents, channel counts or divisibility constraints are violated."""


class NonFiniteError(ArithmeticError):
    """Raised when an op produces NaN or Inf."""


class GradientError(RuntimeError):
    """Raised on backward misuse (non-scalar loss, empty tape)."""


class _State(threading.local):
    """Per-thread engine state: active tape, grad switch and default dtype."""

    def __init__(self) -> None:
        self.tape: Optional[GradTape] = None
        self.grad_enabled = True
        self.dtype = np.dtype(np.float32)


_state = _State()


def get_default_dtype() -> np.dtype:
    """Dtype given to tensors created from python or integer data."""
    return _state.dtype


@contextmanager
def default_dtype(dtype: Any) -> Iterator[None]:
    """Temporarily switch the dtype of newly created tensors (e.g. float64 for gradchecks)."""
    previous = _state.dtype
    _state.dtype = np.dtype(dtype)
    try:
        yield
    finally:
        _state.dtype = previous


def is_grad_enabled() -> bool:
    return _state.grad_enabled


@contextmanager
def no_grad() -> Iterator[None]:
    """Run ops without recording them on the tape."""
    previous = _state.grad_enabled
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = previous


class GradTape:
    """Ordered record of executed differentiable ops.

    Confined to the thread that created it; ``backward`` replays the records in
    reverse order, visiting each exactly once, and then clears the tape. A
    forward pass that never reaches ``backward`` keeps its records until the
    tape is cleared, so inference belongs under ``no_grad`` (``predict`` does this).
    """

    def __init__(self) -> None:
        self.records: list[Function] = []

    def __len__(self) -> int:
        return len(self.records)

    def record(self, fn: "Function") -> None:
        self.records.append(fn)

    def clear(self) -> None:
        for fn in self.records:
            fn.release()
        self.records.clear()


def current_tape() -> GradTape:
    """Return the calling thread's tape, creating it on first use."""
    if _state.tape is None:
        _state.tape = GradTape()
    return _state.tape


class Tensor:
    """N-dimensional numeric array that can take part in the gradient tape."""

    __array_priority__ = 100

    def __init__(
        self,
        data: ArrayLike,
        requires_grad: bool = False,
        dtype: Any = None,
    ):
        self.data = np.asarray(data, dtype=dtype if dtype is not None else get_default_dtype())
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.creator: Optional[Function] = None

    @classmethod
    def _from_op(cls, data: np.ndarray, requires_grad: bool, creator: Optional["Function"]) -> "Tensor":
        out = cls.__new__(cls)
        out.data = data
        out.requires_grad = requires_grad
        out.grad = None
        out.creator = creator
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
        return self.creator is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False, dtype=self.data.dtype)

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate_grad(self, grad: np.ndarray) -> None:
        if grad.shape != self.data.shape:
            raise ShapeError(f"gradient shape {grad.shape} does not match tensor shape {self.data.shape}")
        grad = grad.astype(self.data.dtype, copy=False)
        if self.grad is None:
            self.grad = np.array(grad, copy=True)
        else:
            self.grad += grad

    def backward(self) -> None:
        backward(self)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"

    def __len__(self) -> int:
        return self.data.shape[0]

    # Operator sugar; implementations live in tensor.ops.
    def __add__(self, other: Any) -> "Tensor":
        return _ops.add(self, other)

    def __radd__(self, other: Any) -> "Tensor":
        return _ops.add(other, self)

    def __sub__(self, other: Any) -> "Tensor":
        return _ops.sub(self, other)

    def __rsub__(self, other: Any) -> "Tensor":
        return _ops.sub(other, self)

    def __mul__(self, other: Any) -> "Tensor":
        return _ops.mul(self, other)

    def __rmul__(self, other: Any) -> "Tensor":
        return _ops.mul(other, self)

    def __truediv__(self, other: Any) -> "Tensor":
        return _ops.div(self, other)

    def __rtruediv__(self, other: Any) -> "Tensor":
        return _ops.div(other, self)

    def __neg__(self) -> "Tensor":
        return _ops.neg(self)

    def __pow__(self, exponent: float) -> "Tensor":
        return _ops.power(self, exponent)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return _ops.matmul(self, other)

    def __getitem__(self, index: Any) -> "Tensor":
        return _ops.getitem(self, index)

    def sum(self, axis: Any = None, keepdims: bool = False) -> "Tensor":
        return _ops.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis: Any = None, keepdims: bool = False) -> "Tensor":
        return _ops.mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape: Any) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return _ops.reshape(self, shape)

    def transpose(self, *axes: int) -> "Tensor":
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return _ops.transpose(self, axes or None)

    def exp(self) -> "Tensor":
        return _ops.exp(self)

    def log(self) -> "Tensor":
        return _ops.log(self)

    def sqrt(self) -> "Tensor":
        return _ops.sqrt(self)


def as_tensor(value: Any, like: Optional[Tensor] = None) -> Tensor:
    """Wrap constants as non-differentiable tensors, matching ``like``'s dtype when given."""
    if isinstance(value, Tensor):
        return value
    dtype = like.dtype if like is not None else None
    return Tensor(value, requires_grad=False, dtype=dtype)


class Function:
    """Base class for differentiable operations.

    Subclasses implement ``forward`` on raw arrays and ``backward`` returning one
    gradient array (or ``None``) per input, already reduced to that input's shape.
    """

    def __init__(self) -> None:
        self.inputs: tuple[Tensor, ...] = ()
        self.output: Optional[Tensor] = None

    def forward(self, *arrays: np.ndarray, **kwargs: Any) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__}.forward")

    def backward(self, grad: np.ndarray) -> tuple[Optional[np.ndarray], ...]:
        raise NotImplementedError(f"{type(self).__name__}.backward")

    def release(self) -> None:
        """Drop saved arrays and graph references once the record is consumed."""
        self.__dict__.clear()

    @classmethod
    def apply(cls, *inputs: Any, **kwargs: Any) -> Tensor:
        like = next((t for t in inputs if isinstance(t, Tensor)), None)
        tensors = tuple(as_tensor(t, like=like) for t in inputs)
        fn = cls()
        out = fn.forward(*(t.data for t in tensors), **kwargs)
        if not np.all(np.isfinite(out)):
            raise NonFiniteError(f"{cls.__name__} produced non-finite values")

        requires_grad = _state.grad_enabled and any(t.requires_grad for t in tensors)
        if not requires_grad:
            return Tensor._from_op(out, False, None)

        result = Tensor._from_op(out, True, fn)
        fn.inputs = tensors
        fn.output = result
        current_tape().record(fn)
        return result

    @staticmethod
    def unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
        """Sum out broadcast dimensions so ``grad`` matches ``shape``."""
        if grad.shape == shape:
            return grad
        while grad.ndim > len(shape):
            grad = grad.sum(axis=0)
        for axis, extent in enumerate(shape):
            if extent == 1 and grad.shape[axis] != 1:
                grad = grad.sum(axis=axis, keepdims=True)
        return grad


def backward(loss: Tensor) -> None:
    """Accumulate dLoss/dLeaf on every leaf that requires grad, then clear the tape."""
    tape = current_tape()
    if loss.size != 1:
        tape.clear()
        raise GradientError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad or len(tape) == 0:
        tape.clear()
        raise GradientError("backward called with an empty tape; nothing to differentiate")

    loss.grad = np.ones_like(loss.data)
    for fn in reversed(tape.records):
        out = fn.output
        if out is None or out.grad is None:
            continue
        grads = fn.backward(out.grad)
        for tensor, grad in zip(fn.inputs, grads):
            if grad is None or not tensor.requires_grad:
                continue
            tensor.accumulate_grad(grad)
        if out is not loss:
            out.grad = None

    logger.debug("backward replayed %d ops", len(tape))
    for fn in tape.records:
        if fn.output is not None:
            fn.output.creator = None
    tape.clear()


from tensor import ops as _ops  # noqa: E402  (operator sugar needs the op module)

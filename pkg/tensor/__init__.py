"""Minimal numpy tensor engine with reverse-mode automatic differentiation."""
from tensor.tensor import (
    Function,
    GradTape,
    GradientError,
    NonFiniteError,
    ShapeError,
    Tensor,
    as_tensor,
    backward,
    current_tape,
    default_dtype,
    get_default_dtype,
    is_grad_enabled,
    no_grad,
)

__all__ = [
    "Function",
    "GradTape",
    "GradientError",
    "NonFiniteError",
    "ShapeError",
    "Tensor",
    "as_tensor",
    "backward",
    "current_tape",
    "default_dtype",
    "get_default_dtype",
    "is_grad_enabled",
    "no_grad",
]

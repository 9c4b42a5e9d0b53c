"""Central finite-difference gradient checking on the 64-bit shadow path."""
from __future__ import annotations

import logging
from typing import Callable, Iterable, Optional

import numpy as np

from tensor.tensor import Tensor, backward, no_grad

logger = logging.getLogger(__name__)


class NonDeterministicError(RuntimeError):
    """Raised when the checked function returns different values for identical inputs."""


def finite_diff_gradcheck(
    f: Callable[[Tensor], Tensor],
    x: Tensor,
    h: float = 1e-6,
    wrt: Optional[Iterable[Tensor]] = None,
) -> float:
    """Compare analytic gradients of scalar ``f(x)`` against central differences.

    Args:
        f: Deterministic function returning a scalar tensor.
        x: Input tensor; perturbed element by element.
        h: Finite-difference step.
        wrt: Extra tensors (e.g. module parameters) to check alongside ``x``.

    Returns:
        max |analytic - numeric| / max(1, |analytic|) over every checked element.
    """
    if h <= 0:
        raise ValueError(f"finite-difference step must be positive, got {h}")
    targets = [x, *(wrt or [])]
    for t in targets:
        if t.dtype != np.float64:
            logger.warning("gradcheck on %s tensor; use default_dtype(np.float64) for tight tolerances", t.dtype)
        t.requires_grad = True
        t.grad = None

    with no_grad():
        first = f(x).item()
        second = f(x).item()
    if first != second:
        raise NonDeterministicError(f"f returned {first!r} then {second!r} for the same input")

    backward(f(x))
    analytic = [t.grad if t.grad is not None else np.zeros_like(t.data) for t in targets]

    worst = 0.0
    with no_grad():
        for t, grad in zip(targets, analytic):
            for idx in np.ndindex(t.shape):
                original = t.data[idx]
                t.data[idx] = original + h
                plus = f(x).item()
                t.data[idx] = original - h
                minus = f(x).item()
                t.data[idx] = original
                numeric = (plus - minus) / (2.0 * h)
                err = abs(float(grad[idx]) - numeric) / max(1.0, abs(float(grad[idx])))
                worst = max(worst, err)
    return worst

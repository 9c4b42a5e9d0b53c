"""AdamW with decoupled weight decay, cosine learning-rate schedule and global-norm clipping."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from network.layers import Parameter


@dataclass
class AdamWState:
    step: int = 0
    exp_avg: list[np.ndarray] = field(default_factory=list)
    exp_avg_sq: list[np.ndarray] = field(default_factory=list)


def adamw_step(
    params: Sequence[np.ndarray],
    grads: Sequence[Optional[np.ndarray]],
    state: AdamWState,
    lr: float,
    weight_decay: float,
    betas: tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
) -> AdamWState:
    """Update ``params`` in place: p -= lr*wd*p, then the bias-corrected Adam step."""
    if len(params) != len(grads):
        raise ValueError(f"{len(params)} parameters but {len(grads)} gradients")
    if not state.exp_avg:
        state.exp_avg = [np.zeros_like(p) for p in params]
        state.exp_avg_sq = [np.zeros_like(p) for p in params]
    beta1, beta2 = betas
    state.step += 1
    correction1 = 1.0 - beta1**state.step
    correction2 = 1.0 - beta2**state.step

    for p, g, m, v in zip(params, grads, state.exp_avg, state.exp_avg_sq):
        if g is None:
            g = np.zeros_like(p)
        elif g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {p.shape}")
        if weight_decay:
            p -= lr * weight_decay * p
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= lr * (m / correction1) / (np.sqrt(v / correction2) + eps)
    return state


class AdamW:
    def __init__(
        self,
        params: Sequence[Parameter],
        lr: float = 1e-4,
        weight_decay: float = 5e-4,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
    ):
        self.params = list(params)
        self.lr, self.weight_decay, self.betas, self.eps = lr, weight_decay, betas, eps
        self.state = AdamWState()

    def step(self, lr: Optional[float] = None) -> None:
        adamw_step(
            [p.data for p in self.params],
            [p.grad for p in self.params],
            self.state,
            self.lr if lr is None else lr,
            self.weight_decay,
            self.betas,
            self.eps,
        )

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None


def cosine_lr(t: float, t_max: int, lr0: float = 1e-4, eta_min: float = 1e-6) -> float:
    """Cosine annealing from lr0 at t=0 to eta_min at t>=t_max."""
    if t < 0:
        raise ValueError(f"schedule position must be non-negative, got {t}")
    if t == 0:
        return lr0
    if t >= t_max:
        return eta_min
    return eta_min + 0.5 * (lr0 - eta_min) * (1.0 + math.cos(math.pi * t / t_max))


def global_norm(grads: Sequence[Optional[np.ndarray]]) -> float:
    return float(math.sqrt(sum(float(np.sum(np.square(g, dtype=np.float64))) for g in grads if g is not None)))


def clip_grad_norm(grads: Sequence[Optional[np.ndarray]], max_norm: float) -> tuple[list[Optional[np.ndarray]], float]:
    """Scale all gradients by max_norm/norm when the global L2 norm exceeds max_norm.

    Returns the (possibly scaled) gradients and the norm before clipping.
    """
    if max_norm <= 0:
        raise ValueError(f"max_norm must be positive, got {max_norm}")
    norm = global_norm(grads)
    if norm <= max_norm:
        return list(grads), norm
    scale = max_norm / norm
    return [None if g is None else g * scale for g in grads], norm


def clip_parameters(params: Sequence[Parameter], max_norm: float) -> float:
    """Clip the ``.grad`` buffers of ``params`` in place; return the pre-clip norm."""
    clipped, norm = clip_grad_norm([p.grad for p in params], max_norm)
    for p, g in zip(params, clipped):
        if g is not None:
            p.grad = g.astype(p.data.dtype, copy=False)
    return norm

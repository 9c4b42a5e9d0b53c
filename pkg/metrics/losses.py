"""Cross-entropy, soft Dice and their weighted combination."""
from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from models.configs import LossConfig
from tensor import functional as F
from tensor.tensor import ShapeError, Tensor, as_tensor


def _check_target(logits: Tensor, target: np.ndarray) -> np.ndarray:
    target = np.asarray(target)
    if logits.ndim != 4 or target.shape != (logits.shape[0], *logits.shape[2:]):
        raise ShapeError(f"target {target.shape} does not align with logits {logits.shape}")
    if not np.issubdtype(target.dtype, np.integer):
        raise ValueError(f"target must hold integer class ids, got {target.dtype}")
    if target.size and (target.min() < 0 or target.max() >= logits.shape[1]):
        raise ValueError(f"target ids must lie in [0, {logits.shape[1]})")
    return target


def one_hot(target: np.ndarray, num_classes: int, dtype=np.float32) -> np.ndarray:
    """[N, H, W] class ids -> [N, C, H, W] indicator array."""
    return np.moveaxis(np.eye(num_classes, dtype=dtype)[target], -1, 1)


def ce_loss(logits: Tensor, target: np.ndarray) -> Tensor:
    """Mean pixel cross-entropy of softmax(logits) over the channel axis."""
    target = _check_target(logits, target)
    indicator = as_tensor(one_hot(target, logits.shape[1], logits.dtype), like=logits)
    picked = (F.log_softmax(logits, axis=1) * indicator).sum(axis=1)
    return -picked.mean()


def dice_loss(
    probs: Tensor,
    target: np.ndarray,
    smooth: float = 1e-5,
    classes: Optional[Sequence[int]] = None,
) -> Tensor:
    """1 - mean over classes of (2|X.Y| + eps) / (|X| + |Y| + eps), soft over the whole batch."""
    target = _check_target(probs, target)
    indicator = as_tensor(one_hot(target, probs.shape[1], probs.dtype), like=probs)
    axes = (0, 2, 3)
    intersection = (probs * indicator).sum(axis=axes)
    denominator = probs.sum(axis=axes) + indicator.sum(axis=axes)
    dice = (intersection * 2.0 + smooth) / (denominator + smooth)
    if classes is not None:
        dice = dice[np.asarray(list(classes), dtype=np.int64)]
    return 1.0 - dice.mean()


def loss_terms(logits: Tensor, target: np.ndarray, cfg: Optional[LossConfig] = None) -> tuple[Tensor, Tensor, Tensor]:
    """Return (combined, cross-entropy, dice) for one batch."""
    cfg = cfg or LossConfig()
    ce = ce_loss(logits, target)
    dice = dice_loss(F.softmax(logits, axis=1), target, cfg.smooth)
    return ce * cfg.alpha + dice * (1.0 - cfg.alpha), ce, dice


def combined_loss(logits: Tensor, target: np.ndarray, cfg: Optional[LossConfig] = None) -> Tensor:
    """alpha * CE + (1 - alpha) * Dice."""
    return loss_terms(logits, target, cfg)[0]

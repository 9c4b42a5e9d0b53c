"""Per-class segmentation metrics on integer label maps."""
from __future__ import annotations

import logging
from typing import Literal

import numpy as np
from scipy import ndimage

from models.reports import CaseMetrics, ClassMetrics, ConfusionCounts

logger = logging.getLogger(__name__)

HD95Mode = Literal["boundary", "mask"]

_FOUR_CONNECTED = ndimage.generate_binary_structure(2, 1)


def _masks(pred: np.ndarray, gt: np.ndarray, class_id: int) -> tuple[np.ndarray, np.ndarray]:
    pred, gt = np.asarray(pred), np.asarray(gt)
    if pred.shape != gt.shape:
        raise ValueError(f"prediction {pred.shape} and ground truth {gt.shape} extents differ")
    return pred == class_id, gt == class_id


def confusion_counts(pred: np.ndarray, gt: np.ndarray, class_id: int) -> ConfusionCounts:
    p, g = _masks(pred, gt, class_id)
    return ConfusionCounts(
        tp=int(np.count_nonzero(p & g)),
        fp=int(np.count_nonzero(p & ~g)),
        fn=int(np.count_nonzero(~p & g)),
    )


def dice_from_counts(counts: ConfusionCounts) -> float:
    total = 2 * counts.tp + counts.fp + counts.fn
    return 1.0 if total == 0 else 2 * counts.tp / total


def dsc(pred: np.ndarray, gt: np.ndarray, class_id: int) -> float:
    """2|X.Y| / (|X| + |Y|); 1 when the class is absent from both maps."""
    return dice_from_counts(confusion_counts(pred, gt, class_id))


def recall(counts: ConfusionCounts) -> float:
    return 1.0 if counts.gt_positives == 0 else counts.tp / counts.gt_positives


def iou(counts: ConfusionCounts) -> float:
    union = counts.tp + counts.fp + counts.fn
    return 1.0 if union == 0 else counts.tp / union


def boundary(mask: np.ndarray) -> np.ndarray:
    """Foreground pixels with a 4-neighbour outside the mask or on the image border."""
    interior = ndimage.binary_erosion(mask, structure=_FOUR_CONNECTED, border_value=0)
    return mask & ~interior


def hd95(pred: np.ndarray, gt: np.ndarray, class_id: int, mode: HD95Mode = "boundary") -> float:
    """Symmetric 95th-percentile surface distance in pixels.

    Both sets empty gives 0; exactly one empty gives the image diagonal.
    """
    p, g = _masks(pred, gt, class_id)
    if mode == "boundary":
        p, g = boundary(p), boundary(g)
    elif mode != "mask":
        raise ValueError(f"unknown hd95 mode: {mode}")
    if not p.any() and not g.any():
        return 0.0
    if not p.any() or not g.any():
        return float(np.hypot(*p.shape))
    to_gt = ndimage.distance_transform_edt(~g)[p]
    to_pred = ndimage.distance_transform_edt(~p)[g]
    return float(max(np.percentile(to_gt, 95), np.percentile(to_pred, 95)))


def case_metrics(
    case: int,
    pred: np.ndarray,
    gt: np.ndarray,
    num_classes: int,
    include_recall_iou: bool = False,
    hd95_mode: HD95Mode = "boundary",
) -> CaseMetrics:
    """Foreground-class metrics of one (prediction, ground truth) pair."""
    if gt.size and (gt.min() < 0 or gt.max() >= num_classes or pred.min() < 0 or pred.max() >= num_classes):
        raise ValueError(f"label ids must lie in [0, {num_classes})")
    rows = []
    for k in range(1, num_classes):
        counts = confusion_counts(pred, gt, k)
        rows.append(
            ClassMetrics(
                class_id=k,
                dsc=dice_from_counts(counts),
                hd95=hd95(pred, gt, k, hd95_mode),
                recall=recall(counts) if include_recall_iou else None,
                iou=iou(counts) if include_recall_iou else None,
            )
        )
    return CaseMetrics(case=case, classes=rows)

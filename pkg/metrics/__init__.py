"""Training losses and segmentation metrics."""
from metrics.losses import ce_loss, combined_loss, dice_loss, loss_terms, one_hot
from metrics.scores import confusion_counts, dice_from_counts, dsc, hd95, iou, recall

__all__ = [
    "ce_loss",
    "combined_loss",
    "confusion_counts",
    "dice_from_counts",
    "dice_loss",
    "dsc",
    "hd95",
    "iou",
    "loss_terms",
    "one_hot",
    "recall",
]

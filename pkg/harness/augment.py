"""Paired flip / right-angle rotation augmentation of (image, label) samples."""
from __future__ import annotations

import numpy as np


def augment(
    image: np.ndarray,
    label: np.ndarray,
    rng: np.random.Generator,
    flip: bool = True,
    rotate: bool = True,
    prob: float = 0.5,
) -> tuple[np.ndarray, np.ndarray]:
    """Apply one random transform to image [C, H, W] and label [H, W] alike.

    Horizontal flip, vertical flip and a rotation by 90, 180 or 270 degrees are
    each applied with probability ``prob``.
    """
    if image.shape[-2:] != label.shape:
        raise ValueError(f"image {image.shape} and label {label.shape} extents differ")
    if flip:
        if rng.random() < prob:
            image, label = image[..., :, ::-1], label[:, ::-1]
        if rng.random() < prob:
            image, label = image[..., ::-1, :], label[::-1, :]
    if rotate and rng.random() < prob:
        k = int(rng.integers(1, 4))
        image, label = np.rot90(image, k, axes=(-2, -1)), np.rot90(label, k)
    return np.ascontiguousarray(image), np.ascontiguousarray(label)


def augment_batch(
    images: np.ndarray,
    labels: np.ndarray,
    rng: np.random.Generator,
    flip: bool = True,
    rotate: bool = True,
    prob: float = 0.5,
) -> tuple[np.ndarray, np.ndarray]:
    pairs = [augment(img, lab, rng, flip, rotate, prob) for img, lab in zip(images, labels)]
    return np.stack([p[0] for p in pairs]), np.stack([p[1] for p in pairs])

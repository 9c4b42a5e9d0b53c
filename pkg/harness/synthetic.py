"""Deterministic synthetic segmentation data: noisy geometric shapes on a flat background."""
from __future__ import annotations

import logging
from typing import Literal, NamedTuple

import numpy as np

from models.configs import ShapeKind, SynthSpec

logger = logging.getLogger(__name__)

Split = Literal["train", "test"]
_SPLIT_STREAM = {"train": 0, "test": 1}


class Dataset(NamedTuple):
    images: np.ndarray  # [N, C, H, W] float32
    labels: np.ndarray  # [N, H, W] int64

    def __len__(self) -> int:
        return len(self.images)


def shape_mask(kind: ShapeKind, size: int, rng: np.random.Generator) -> np.ndarray:
    """Boolean mask of one randomly placed shape that fits inside a size x size canvas."""
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    if kind in ("disk", "ring"):
        radius = rng.uniform(size / 10, size / 5)
        cy, cx = rng.uniform(radius, size - 1 - radius, size=2)
        dist = np.hypot(yy - cy, xx - cx)
        if kind == "disk":
            return dist <= radius
        return (dist <= radius) & (dist >= 0.55 * radius)
    if kind == "rectangle":
        half_h, half_w = rng.uniform(size / 10, size / 4, size=2)
        cy = rng.uniform(half_h, size - 1 - half_h)
        cx = rng.uniform(half_w, size - 1 - half_w)
        return (np.abs(yy - cy) <= half_h) & (np.abs(xx - cx) <= half_w)
    if kind == "curve":
        amplitude = rng.uniform(size / 16, size / 8)
        cy = rng.uniform(amplitude + 2, size - 3 - amplitude)
        x0 = rng.uniform(0, size / 4)
        x1 = rng.uniform(3 * size / 4, size - 1)
        phase = rng.uniform(0, 2 * np.pi)
        centre = cy + amplitude * np.sin(2 * np.pi * (xx - x0) / size + phase)
        return (np.abs(yy - centre) <= 1.5) & (xx >= x0) & (xx <= x1)
    raise ValueError(f"unknown shape kind: {kind}")


def _class_tint(class_id: int, foreground: int, channels: int) -> np.ndarray:
    phase = 2 * np.pi * (class_id / foreground + np.arange(channels) / channels)
    return (0.6 + 0.4 * np.cos(phase)).reshape(channels, 1, 1)


def generate_dataset(spec: SynthSpec, split: Split = "train") -> Dataset:
    """Generate the ``split`` partition of ``spec``; identical bytes for identical specs.

    Each image holds 1..num_classes-1 shapes of distinct foreground classes, later
    shapes drawn over earlier ones; labels are exact.
    """
    count = spec.n_train if split == "train" else spec.n_test
    rng = np.random.default_rng([spec.seed, _SPLIT_STREAM[split]])
    size, channels, foreground = spec.image_size, spec.channels, spec.num_classes - 1
    kinds = spec.shape_kinds
    weights = np.asarray(spec.class_weights or [1.0] * foreground, dtype=np.float64)
    weights = weights / weights.sum()

    images = np.zeros((count, channels, size, size), dtype=np.float32)
    labels = np.zeros((count, size, size), dtype=np.int64)
    for i in range(count):
        background = rng.uniform(0.0, 0.2)
        image = np.full((channels, size, size), background)
        label = labels[i]
        n_shapes = int(rng.integers(1, foreground + 1))
        classes = rng.choice(foreground, size=n_shapes, replace=False, p=weights) + 1
        for class_id in classes:
            mask = shape_mask(kinds[class_id - 1], size, rng)
            intensity = rng.uniform(*spec.contrast)
            image[:, mask] = (intensity * _class_tint(class_id, foreground, channels))[:, :, 0]
            label[mask] = class_id
        if spec.noise_std > 0:
            image = image + rng.normal(0.0, spec.noise_std, size=image.shape)
        images[i] = image

    logger.info("generated %d %s samples (%dx%d, %d classes)", count, split, size, size, spec.num_classes)
    return Dataset(images, labels)

"""8-bit PNG I/O for images and label maps."""
from pathlib import Path
from typing import Union

import numpy as np
from PIL import Image


def save_image(path: Union[str, Path], image: np.ndarray) -> None:
    """Save a [C, H, W] float image with values in [0, 1] (clipped) as 8-bit PNG."""
    if image.ndim != 3 or image.shape[0] not in (1, 3):
        raise ValueError(f"expected a [1|3, H, W] image, got {image.shape}")
    pixels = np.clip(np.rint(np.moveaxis(image, 0, -1) * 255.0), 0, 255).astype(np.uint8)
    if pixels.shape[-1] == 1:
        Image.fromarray(pixels[..., 0], mode='L').save(path)
    else:
        Image.fromarray(pixels, mode='RGB').save(path)


def load_image(path: Union[str, Path], channels: int = 3) -> np.ndarray:
    """Load a PNG as a [channels, H, W] float32 array in [0, 1]."""
    mode = {1: 'L', 3: 'RGB'}.get(channels)
    if mode is None:
        raise ValueError(f"only 1 or 3 channels are supported, got {channels}")
    with Image.open(path) as img:
        pixels = np.asarray(img.convert(mode), dtype=np.float32) / 255.0
    if pixels.ndim == 2:
        pixels = pixels[..., None]
    return np.ascontiguousarray(np.moveaxis(pixels, -1, 0))


def save_label(path: Union[str, Path], label: np.ndarray) -> None:
    """Save an [H, W] class-id map as an 8-bit grayscale PNG (pixel value = class id)."""
    if label.ndim != 2:
        raise ValueError(f"expected an [H, W] label map, got {label.shape}")
    if label.min() < 0 or label.max() > 255:
        raise ValueError("class ids must fit in 8 bits")
    Image.fromarray(label.astype(np.uint8), mode='L').save(path)


def load_label(path: Union[str, Path]) -> np.ndarray:
    with Image.open(path) as img:
        if img.mode not in ('L', 'P', 'I'):
            raise ValueError(f"label PNG must be single-channel, got mode {img.mode}")
        return np.asarray(img, dtype=np.int64)

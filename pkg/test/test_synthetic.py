"""Tests for the synthetic dataset generator and augmentation."""
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.parent))

import numpy as np
import pytest

from harness.augment import augment, augment_batch
from harness.synthetic import generate_dataset, shape_mask
from models.configs import SynthSpec


def test_generation_is_deterministic():
    spec = SynthSpec(image_size=32, n_train=6, n_test=3, seed=7)
    a, b = generate_dataset(spec), generate_dataset(spec)
    assert a.images.tobytes() == b.images.tobytes()
    assert a.labels.tobytes() == b.labels.tobytes()


def test_splits_and_seeds_differ():
    spec = SynthSpec(image_size=32, n_train=4, n_test=4, seed=1)
    train, test = generate_dataset(spec, "train"), generate_dataset(spec, "test")
    assert not np.array_equal(train.images, test.images)
    other = generate_dataset(spec.model_copy(update={"seed": 2}), "train")
    assert not np.array_equal(train.images, other.images)


def test_shapes_dtypes_and_label_range():
    spec = SynthSpec(image_size=32, num_classes=5, channels=1, n_train=10, n_test=0)
    data = generate_dataset(spec)
    assert data.images.shape == (10, 1, 32, 32) and data.images.dtype == np.float32
    assert data.labels.shape == (10, 32, 32) and data.labels.dtype == np.int64
    assert data.labels.min() >= 0 and data.labels.max() <= 4
    assert len(generate_dataset(spec, "test")) == 0
    assert all((labels > 0).any() for labels in data.labels)


def test_noise_free_pixels_follow_labels():
    spec = SynthSpec(image_size=32, num_classes=3, noise_std=0.0, n_train=5)
    data = generate_dataset(spec)
    for image, labels in zip(data.images, data.labels):
        background = image[:, labels == 0]
        assert background.max() <= 0.2 + 1e-6
        assert np.ptp(background, axis=1).max() < 1e-6
        for k in np.unique(labels[labels > 0]):
            region = image[:, labels == k]
            assert np.ptp(region, axis=1).max() < 1e-6


def test_class_weights_bias_the_class_frequencies():
    spec = SynthSpec(image_size=32, num_classes=3, n_train=200, class_weights=[20.0, 1.0])
    labels = generate_dataset(spec).labels
    present_1 = sum((lab == 1).any() for lab in labels)
    present_2 = sum((lab == 2).any() for lab in labels)
    assert present_1 > present_2


@pytest.mark.parametrize("kind", ["disk", "ring", "rectangle", "curve"])
def test_every_shape_kind_is_non_empty(kind):
    rng = np.random.default_rng(0)
    for _ in range(10):
        assert shape_mask(kind, 32, rng).any()


def test_unknown_shape_kind():
    with pytest.raises(ValueError):
        shape_mask("star", 32, np.random.default_rng(0))


def test_synth_spec_validation():
    with pytest.raises(ValueError):
        SynthSpec(num_classes=3, shapes=["disk"])
    with pytest.raises(ValueError):
        SynthSpec(num_classes=3, class_weights=[1.0, 0.0])
    with pytest.raises(ValueError):
        SynthSpec(contrast=(0.8, 0.2))
    assert SynthSpec(num_classes=6).shape_kinds == ["disk", "ring", "rectangle", "curve", "disk"]


def test_augment_moves_image_and_label_together():
    rng = np.random.default_rng(0)
    label = rng.integers(0, 3, size=(8, 8))
    image = np.stack([label * 1.0, label * 2.0])
    for seed in range(20):
        img, lab = augment(image, label, np.random.default_rng(seed), prob=0.7)
        np.testing.assert_array_equal(img[0], lab)
        np.testing.assert_array_equal(img[1], 2 * lab)
        assert img.flags.c_contiguous


def test_augment_disabled_is_identity():
    rng = np.random.default_rng(0)
    image, label = rng.random((2, 4, 4)), rng.integers(0, 2, size=(4, 4))
    img, lab = augment(image, label, rng, flip=False, rotate=False)
    np.testing.assert_array_equal(img, image)
    np.testing.assert_array_equal(lab, label)
    img, lab = augment(image, label, rng, prob=0.0)
    np.testing.assert_array_equal(img, image)


def test_augment_rejects_misaligned_pair_and_batches():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        augment(np.zeros((1, 4, 4)), np.zeros((4, 5)), rng)
    images, labels = augment_batch(np.zeros((3, 2, 4, 4)), np.zeros((3, 4, 4), dtype=np.int64), rng)
    assert images.shape == (3, 2, 4, 4) and labels.shape == (3, 4, 4)

"""Tests for cross-entropy, soft Dice and their combination."""
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.parent))

import numpy as np
import pytest

from metrics.losses import ce_loss, combined_loss, dice_loss, loss_terms, one_hot
from models.configs import LossConfig
from tensor import ShapeError, Tensor, default_dtype
from tensor import functional as F


def _logits_for(target, num_classes, margin):
    logits = np.zeros((target.shape[0], num_classes, *target.shape[1:]))
    logits += np.moveaxis(np.eye(num_classes)[target], -1, 1) * margin
    return logits


def test_one_hot_layout():
    target = np.array([[[0, 2], [1, 0]]])
    encoded = one_hot(target, 3)
    assert encoded.shape == (1, 3, 2, 2)
    np.testing.assert_array_equal(encoded[0, 2], [[0, 1], [0, 0]])


def test_uniform_logits_give_log_classes_cross_entropy():
    target = np.random.default_rng(0).integers(0, 4, size=(2, 3, 3))
    with default_dtype(np.float64):
        loss = ce_loss(Tensor(np.zeros((2, 4, 3, 3))), target)
    assert loss.item() == pytest.approx(np.log(4))


def test_confident_correct_logits_give_near_zero_losses():
    target = np.random.default_rng(1).integers(0, 3, size=(2, 4, 4))
    with default_dtype(np.float64):
        total, ce, dice = loss_terms(Tensor(_logits_for(target, 3, 50.0)), target)
    assert ce.item() < 1e-12
    assert dice.item() < 1e-9
    assert total.item() == pytest.approx(0.5 * ce.item() + 0.5 * dice.item())


def test_dice_of_perfect_probabilities_is_zero_and_of_disjoint_is_one():
    target = np.array([[[0, 1], [1, 0]]])
    perfect = one_hot(target, 2, np.float64)
    swapped = perfect[:, ::-1].copy()
    with default_dtype(np.float64):
        assert dice_loss(Tensor(perfect), target).item() == pytest.approx(0.0, abs=1e-9)
        assert dice_loss(Tensor(swapped), target).item() == pytest.approx(1.0, abs=1e-5)


def test_dice_absent_class_counts_as_perfect():
    target = np.zeros((1, 2, 2), dtype=np.int64)
    probs = one_hot(target, 3, np.float64)
    with default_dtype(np.float64):
        assert dice_loss(Tensor(probs), target).item() == pytest.approx(0.0, abs=1e-9)


def test_dice_class_subset():
    target = np.array([[[0, 1], [1, 0]]])
    probs = one_hot(target, 2, np.float64)
    probs[:, 1] = 0.5
    with default_dtype(np.float64):
        assert dice_loss(Tensor(probs), target, classes=[1]).item() == pytest.approx(0.5, abs=1e-5)
        assert dice_loss(Tensor(probs), target, classes=[0]).item() == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("alpha", [0.0, 0.3, 1.0])
def test_combined_loss_weights_terms(alpha):
    rng = np.random.default_rng(2)
    target = rng.integers(0, 3, size=(2, 4, 4))
    with default_dtype(np.float64):
        logits = Tensor(rng.standard_normal((2, 3, 4, 4)))
        ce = ce_loss(logits, target).item()
        dice = dice_loss(F.softmax(logits, axis=1), target).item()
        total = combined_loss(logits, target, LossConfig(alpha=alpha)).item()
    assert total == pytest.approx(alpha * ce + (1 - alpha) * dice)


def test_misaligned_or_invalid_targets_are_rejected():
    logits = Tensor(np.zeros((1, 3, 4, 4)))
    with pytest.raises(ShapeError):
        ce_loss(logits, np.zeros((1, 4, 5), dtype=np.int64))
    with pytest.raises(ValueError):
        ce_loss(logits, np.full((1, 4, 4), 3))
    with pytest.raises(ValueError):
        ce_loss(logits, np.zeros((1, 4, 4)))


def test_loss_config_bounds():
    with pytest.raises(ValueError):
        LossConfig(alpha=1.5)
    with pytest.raises(ValueError):
        LossConfig(smooth=0.0)

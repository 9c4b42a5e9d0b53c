"""Tests for convolution, pooling, resize, softmax, activations and norms."""
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.parent))

import numpy as np
import pytest
from scipy.special import erf

from tensor import ShapeError, Tensor, default_dtype
from tensor import functional as F
from tensor.gradcheck import finite_diff_gradcheck
from oracles import bilinear_scalar, conv2d_loop


@pytest.mark.parametrize(
    "channels, out, kernel, stride, padding, dilation, groups",
    [
        (3, 4, 3, 1, 1, 1, 1),
        (4, 6, 3, 2, 1, 1, 2),
        (4, 4, 3, 1, 1, 1, 4),
        (2, 3, 3, 1, 2, 2, 1),
        (2, 2, 7, 2, 3, 1, 1),
        (3, 5, 1, 1, 0, 1, 1),
    ],
)
def test_conv2d_matches_direct_summation(channels, out, kernel, stride, padding, dilation, groups):
    rng = np.random.default_rng(0)
    x = rng.standard_normal((2, channels, 9, 8))
    w = rng.standard_normal((out, channels // groups, kernel, kernel))
    b = rng.standard_normal(out)
    with default_dtype(np.float64):
        got = F.conv2d(Tensor(x), Tensor(w), Tensor(b), stride, padding, dilation, groups).data
    expected = conv2d_loop(x, w, b, stride, padding, dilation, groups)
    np.testing.assert_allclose(got, expected, rtol=1e-10, atol=1e-10)


def test_conv2d_identity_kernel_copies_input():
    x = np.arange(16.0).reshape(1, 1, 4, 4)
    w = np.zeros((1, 1, 3, 3))
    w[0, 0, 1, 1] = 1.0
    out = F.conv2d(Tensor(x), Tensor(w), padding=1)
    np.testing.assert_array_equal(out.data, x)


def test_conv2d_rejects_channel_mismatch():
    with pytest.raises(ShapeError):
        F.conv2d(Tensor(np.ones((1, 3, 4, 4))), Tensor(np.ones((2, 2, 3, 3))))


def test_conv2d_rejects_indivisible_groups():
    with pytest.raises(ShapeError):
        F.conv2d(Tensor(np.ones((1, 3, 4, 4))), Tensor(np.ones((4, 1, 1, 1))), groups=2)


def test_conv2d_gradients_match_finite_differences():
    rng = np.random.default_rng(1)
    with default_dtype(np.float64):
        x = Tensor(rng.standard_normal((1, 4, 5, 5)))
        w = Tensor(rng.standard_normal((4, 2, 3, 3)))
        b = Tensor(rng.standard_normal(4))
        proj = Tensor(rng.standard_normal((1, 4, 3, 3)))
        err = finite_diff_gradcheck(
            lambda t: (F.conv2d(t, w, b, stride=2, padding=2, dilation=2, groups=2) * proj).sum(), x, wrt=[w, b]
        )
    assert err < 1e-6


def test_max_pool_example():
    x = Tensor(np.array([[1.0, 2.0, 5.0, 0.0], [3.0, 4.0, 1.0, 1.0], [0.0, 0.0, 9.0, 8.0], [1.0, 1.0, 7.0, 6.0]])[None, None])
    np.testing.assert_array_equal(F.pool2d(x, "max").data[0, 0], [[4.0, 5.0], [1.0, 9.0]])
    np.testing.assert_array_equal(F.pool2d(x, "avg").data[0, 0], [[2.5, 1.75], [0.5, 7.5]])


def test_pool_gradients_match_finite_differences():
    rng = np.random.default_rng(2)
    with default_dtype(np.float64):
        x = Tensor(rng.standard_normal((1, 2, 6, 6)))
        proj = Tensor(rng.standard_normal((1, 2, 3, 3)))
        assert finite_diff_gradcheck(lambda t: (F.pool2d(t, "max") * proj).sum(), x) < 1e-6
        assert finite_diff_gradcheck(lambda t: (F.pool2d(t, "avg") * proj).sum(), x) < 1e-6


def test_pool_window_larger_than_input_raises():
    with pytest.raises(ShapeError):
        F.pool2d(Tensor(np.ones((1, 1, 1, 1))), "max", kernel=2)


def test_bilinear_resize_matches_pointwise_interpolation():
    rng = np.random.default_rng(3)
    row = rng.standard_normal(5)
    with default_dtype(np.float64):
        out = F.resize2d(Tensor(row.reshape(1, 1, 1, 5)), scale=2).data
    # one-row input: the vertical pass is the identity
    np.testing.assert_allclose(out[0, 0, 0], bilinear_scalar(row, 2))
    np.testing.assert_allclose(out[0, 0, 1], bilinear_scalar(row, 2))


def test_resize_preserves_constants_and_nearest_repeats():
    const = Tensor(np.full((1, 2, 3, 3), 7.0))
    np.testing.assert_allclose(F.resize2d(const, 4).data, 7.0)
    x = Tensor(np.array([[1.0, 2.0], [3.0, 4.0]])[None, None])
    expected = np.repeat(np.repeat(x.data, 2, axis=2), 2, axis=3)
    np.testing.assert_array_equal(F.resize2d(x, 2, "nearest").data, expected)


def test_resize_gradients_match_finite_differences():
    rng = np.random.default_rng(4)
    with default_dtype(np.float64):
        x = Tensor(rng.standard_normal((1, 1, 3, 4)))
        proj = Tensor(rng.standard_normal((1, 1, 6, 8)))
        assert finite_diff_gradcheck(lambda t: (F.resize2d(t, 2) * proj).sum(), x) < 1e-6


def test_softmax_rows_sum_to_one_and_are_shift_invariant():
    rng = np.random.default_rng(5)
    x = rng.standard_normal((4, 6))
    with default_dtype(np.float64):
        p = F.softmax(Tensor(x), axis=-1).data
        shifted = F.softmax(Tensor(x + 100.0), axis=-1).data
        logp = F.log_softmax(Tensor(x), axis=-1).data
    np.testing.assert_allclose(p.sum(axis=-1), 1.0)
    np.testing.assert_allclose(p, shifted, atol=1e-12)
    np.testing.assert_allclose(np.exp(logp), p, atol=1e-12)


def test_softmax_gradients_match_finite_differences():
    rng = np.random.default_rng(6)
    with default_dtype(np.float64):
        x = Tensor(rng.standard_normal((3, 4)))
        proj = Tensor(rng.standard_normal((3, 4)))
        assert finite_diff_gradcheck(lambda t: (F.softmax(t, axis=1) * proj).sum(), x) < 1e-6
        assert finite_diff_gradcheck(lambda t: (F.log_softmax(t, axis=0) * proj).sum(), x) < 1e-6


def test_activation_values():
    x = np.array([-2.0, 0.0, 1.5])
    with default_dtype(np.float64):
        np.testing.assert_array_equal(F.relu(Tensor(x)).data, [0.0, 0.0, 1.5])
        np.testing.assert_allclose(F.sigmoid(Tensor(x)).data, 1 / (1 + np.exp(-x)))
        np.testing.assert_allclose(F.gelu(Tensor(x)).data, 0.5 * x * (1 + erf(x / np.sqrt(2.0))))
    with pytest.raises(ValueError):
        F.activation(Tensor(x), "swish")


@pytest.mark.parametrize("kind", ["sigmoid", "gelu"])
def test_activation_gradients_match_finite_differences(kind):
    rng = np.random.default_rng(7)
    with default_dtype(np.float64):
        x = Tensor(rng.standard_normal((2, 5)))
        assert finite_diff_gradcheck(lambda t: (F.activation(t, kind) * 1.3).sum(), x) < 1e-6


def test_layer_norm_normalizes_the_feature_axis():
    rng = np.random.default_rng(8)
    with default_dtype(np.float64):
        x = Tensor(rng.standard_normal((2, 5, 3, 3)) * 4 + 2)
        out = F.layer_norm(x, Tensor(np.ones(5)), Tensor(np.zeros(5)), eps=0.0, axis=1).data
    np.testing.assert_allclose(out.mean(axis=1), 0.0, atol=1e-12)
    np.testing.assert_allclose(out.var(axis=1), 1.0, atol=1e-10)


def test_layer_norm_gradients_match_finite_differences():
    rng = np.random.default_rng(9)
    with default_dtype(np.float64):
        x = Tensor(rng.standard_normal((3, 4)))
        gamma = Tensor(rng.standard_normal(4))
        beta = Tensor(rng.standard_normal(4))
        proj = Tensor(rng.standard_normal((3, 4)))
        err = finite_diff_gradcheck(lambda t: (F.layer_norm(t, gamma, beta) * proj).sum(), x, wrt=[gamma, beta])
    assert err < 1e-6


def test_batch_norm_training_updates_running_statistics():
    rng = np.random.default_rng(10)
    x = rng.standard_normal((4, 2, 3, 3)) + np.array([1.0, -3.0]).reshape(1, 2, 1, 1)
    running_mean = np.zeros(2)
    running_var = np.ones(2)
    with default_dtype(np.float64):
        out = F.batch_norm(Tensor(x), Tensor(np.ones(2)), Tensor(np.zeros(2)), running_mean, running_var, True).data
    np.testing.assert_allclose(out.mean(axis=(0, 2, 3)), 0.0, atol=1e-12)
    np.testing.assert_allclose(running_mean, 0.1 * x.mean(axis=(0, 2, 3)))
    np.testing.assert_allclose(running_var, 0.9 + 0.1 * x.var(axis=(0, 2, 3), ddof=1))


def test_batch_norm_eval_uses_running_statistics():
    x = np.full((1, 1, 2, 2), 3.0)
    with default_dtype(np.float64):
        out = F.batch_norm(
            Tensor(x), Tensor([2.0]), Tensor([1.0]), np.array([1.0]), np.array([4.0]), False, eps=0.0
        ).data
    np.testing.assert_allclose(out, 2.0 * (3.0 - 1.0) / 2.0 + 1.0)


def test_batch_norm_gradients_match_finite_differences():
    rng = np.random.default_rng(11)
    with default_dtype(np.float64):
        x = Tensor(rng.standard_normal((3, 2, 2, 2)))
        gamma = Tensor(rng.standard_normal(2))
        beta = Tensor(rng.standard_normal(2))
        proj = Tensor(rng.standard_normal((3, 2, 2, 2)))

        def f(t):
            return (F.batch_norm(t, gamma, beta, np.zeros(2), np.ones(2), True) * proj).sum()

        assert finite_diff_gradcheck(f, x, wrt=[gamma, beta]) < 1e-6


def test_batch_norm_rejects_empty_batch():
    with pytest.raises(ShapeError):
        F.batch_norm(Tensor(np.ones((0, 2, 2, 2))), Tensor(np.ones(2)), Tensor(np.zeros(2)), np.zeros(2), np.ones(2), True)

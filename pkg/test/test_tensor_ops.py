"""Tests for the tensor value type, elementwise/shape ops and backward."""
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.parent))

import threading

import numpy as np
import pytest

from tensor import GradientError, NonFiniteError, ShapeError, Tensor, current_tape, default_dtype, no_grad
from tensor import ops
from tensor.gradcheck import NonDeterministicError, finite_diff_gradcheck


def test_tensor_defaults_to_float32():
    t = Tensor([[1, 2], [3, 4]])
    assert t.dtype == np.float32
    assert t.shape == (2, 2)
    assert t.size == 4


def test_default_dtype_context_switches_to_float64():
    with default_dtype(np.float64):
        assert Tensor([1.0]).dtype == np.float64
    assert Tensor([1.0]).dtype == np.float32


def test_backward_of_sum_is_ones():
    x = Tensor(np.arange(6.0).reshape(2, 3), requires_grad=True)
    x.sum().backward()
    np.testing.assert_array_equal(x.grad, np.ones((2, 3)))


def test_backward_of_sum_of_squares_is_twice_x():
    x = Tensor(np.array([1.0, -2.0, 3.0]), requires_grad=True)
    (x * x).sum().backward()
    np.testing.assert_allclose(x.grad, 2 * x.data)


def test_backward_clears_tape():
    x = Tensor(np.ones(3), requires_grad=True)
    (x * 2.0).sum().backward()
    assert len(current_tape()) == 0


def test_backward_rejects_non_scalar():
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(GradientError):
        (x * 2.0).backward()
    assert len(current_tape()) == 0


def test_rejected_backward_drops_stale_records():
    current_tape().clear()
    x = Tensor(np.ones(3), requires_grad=True)
    _ = x * 4.0
    assert len(current_tape()) == 1
    with pytest.raises(GradientError):
        Tensor(3.0).backward()
    assert len(current_tape()) == 0


def test_backward_rejects_empty_tape():
    with pytest.raises(GradientError):
        Tensor(3.0).backward()


def test_no_grad_records_nothing():
    x = Tensor(np.ones(3), requires_grad=True)
    with no_grad():
        y = (x * 3.0).sum()
    assert not y.requires_grad
    assert len(current_tape()) == 0


def test_non_finite_output_raises():
    with pytest.raises(NonFiniteError):
        ops.log(Tensor([0.0, 1.0]))


def test_broadcast_gradients_are_reduced():
    a = Tensor(np.ones((2, 3)), requires_grad=True)
    b = Tensor(np.ones((1, 3)), requires_grad=True)
    (a * b).sum().backward()
    assert b.grad.shape == (1, 3)
    np.testing.assert_array_equal(b.grad, [[2.0, 2.0, 2.0]])


def test_matmul_examples():
    eye = Tensor(np.eye(2))
    m = Tensor([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal((eye @ m).data, m.data)
    np.testing.assert_array_equal((m @ Tensor([[5.0], [6.0]])).data, [[17.0], [39.0]])
    np.testing.assert_array_equal((m @ Tensor(np.zeros((2, 2)))).data, np.zeros((2, 2)))


def test_matmul_dimension_mismatch():
    with pytest.raises(ShapeError):
        Tensor(np.ones((2, 3))) @ Tensor(np.ones((2, 3)))


def test_reshape_mismatch_raises_shape_error():
    with pytest.raises(ShapeError):
        Tensor(np.ones(6)).reshape(4, 2)


def test_concat_and_getitem_route_gradients():
    a = Tensor(np.ones((1, 2)), requires_grad=True)
    b = Tensor(np.ones((1, 3)), requires_grad=True)
    joined = ops.concat([a, b], axis=1)
    (joined[:, 1:4] * 2.0).sum().backward()
    np.testing.assert_array_equal(a.grad, [[0.0, 2.0]])
    np.testing.assert_array_equal(b.grad, [[2.0, 2.0, 0.0]])


def test_gather_accumulates_repeated_rows():
    table = Tensor(np.arange(6.0).reshape(3, 2), requires_grad=True)
    out = ops.gather(table, np.array([0, 0, 2]))
    np.testing.assert_array_equal(out.data, [[0, 1], [0, 1], [4, 5]])
    out.sum().backward()
    np.testing.assert_array_equal(table.grad, [[2, 2], [0, 0], [1, 1]])


def test_roll_and_pad_are_invertible_in_gradient():
    x = Tensor(np.arange(4.0).reshape(1, 4), requires_grad=True)
    weights = Tensor(np.arange(6.0).reshape(1, 6))
    y = ops.pad(ops.roll(x, (1,), (1,)), ((0, 0), (1, 1)))
    (y * weights).sum().backward()
    # x[j] lands at padded position ((j + 1) % 4) + 1
    np.testing.assert_array_equal(x.grad, [[2.0, 3.0, 4.0, 1.0]])


@pytest.mark.parametrize(
    "fn",
    [
        lambda t: (t * t * 0.5 + t / 3.0 - t).sum(),
        lambda t: ops.exp(t * 0.3).mean(),
        lambda t: ops.sqrt(t * t + 1.0).sum(),
        lambda t: ops.log(t * t + 2.0).sum(),
        lambda t: (t.transpose(1, 0) @ t).sum(),
        lambda t: (t**3).sum(),
        lambda t: ops.roll(t, (1, 2), (0, 1))[1:, ::2].sum(),
    ],
)
def test_elementwise_and_shape_gradients_match_finite_differences(fn):
    rng = np.random.default_rng(0)
    with default_dtype(np.float64):
        x = Tensor(rng.standard_normal((3, 3)))
        assert finite_diff_gradcheck(fn, x) < 1e-6


def test_gradcheck_of_sum_is_exact():
    with default_dtype(np.float64):
        x = Tensor(np.random.default_rng(1).standard_normal((4,)))
        assert finite_diff_gradcheck(lambda t: t.sum(), x) < 1e-8


def test_gradcheck_detects_non_determinism():
    calls = iter(range(100))
    with default_dtype(np.float64):
        x = Tensor(np.ones(2))
        with pytest.raises(NonDeterministicError):
            finite_diff_gradcheck(lambda t: t.sum() + float(next(calls)), x)


def test_gradcheck_rejects_non_positive_step():
    with pytest.raises(ValueError):
        finite_diff_gradcheck(lambda t: t.sum(), Tensor(np.ones(2)), h=0.0)


def test_tapes_are_thread_local():
    current_tape().clear()
    lengths = []

    def worker():
        y = Tensor(np.ones(2), requires_grad=True) * 2.0
        lengths.append(len(current_tape()))
        y.sum().backward()

    x = Tensor(np.ones(2), requires_grad=True)
    _ = x * 5.0
    thread = threading.Thread(target=worker)
    thread.start()
    thread.join()
    assert lengths == [1]
    assert len(current_tape()) == 1
    current_tape().clear()

"""Tests for the HTSR tensor file format."""
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.parent))

import struct

import numpy as np
import pytest

from tensor import Tensor
from tensor.serialization import MAGIC, TensorFormatError, decode, encode, load_tensor, save_tensor


def test_header_layout():
    blob = encode(np.zeros((2, 3), dtype=np.float32))
    assert blob[:4] == MAGIC
    assert blob[4:7] == bytes([1, 0, 2])
    assert struct.unpack("<2I", blob[7:15]) == (2, 3)
    assert len(blob) == 15 + 6 * 4


def test_float64_payload_is_preserved_exactly(tmp_path):
    value = np.random.default_rng(0).standard_normal((3, 1, 4))
    path = tmp_path / "w.htsr"
    save_tensor(path, value, dtype_tag=1)
    loaded = load_tensor(path)
    assert loaded.dtype == np.float64
    np.testing.assert_array_equal(loaded, value)


def test_writer_defaults_to_float32(tmp_path):
    save_tensor(tmp_path / "d.htsr", np.array([0.1, 0.2]))
    loaded = load_tensor(tmp_path / "d.htsr")
    assert loaded.dtype == np.float32
    np.testing.assert_allclose(loaded, [0.1, 0.2], rtol=1e-6)


def test_tensor_and_scalar_values(tmp_path):
    save_tensor(tmp_path / "t.htsr", Tensor([[1.5, -2.0]]))
    np.testing.assert_array_equal(load_tensor(tmp_path / "t.htsr"), [[1.5, -2.0]])
    save_tensor(tmp_path / "s.htsr", np.float32(3.0))
    assert load_tensor(tmp_path / "s.htsr").shape == ()


def test_empty_extent_is_allowed():
    assert decode(encode(np.zeros((0, 4), dtype=np.float32))).shape == (0, 4)


@pytest.mark.parametrize(
    "mutate",
    [
        lambda b: b"XTSR" + b[4:],
        lambda b: b[:4] + bytes([2]) + b[5:],
        lambda b: b[:5] + bytes([7]) + b[6:],
        lambda b: b[:-1],
        lambda b: b + b"\x00",
        lambda b: b[:3],
        lambda b: b[:9],
    ],
)
def test_malformed_payloads_are_rejected(mutate):
    blob = encode(np.ones((2, 2), dtype=np.float32))
    with pytest.raises(TensorFormatError):
        decode(mutate(blob))


def test_unknown_dtype_tag_on_encode():
    with pytest.raises(TensorFormatError):
        encode(np.ones(2), dtype_tag=5)


def test_truncated_checkpoint_tensor_reports_format_error(tmp_path):
    path = tmp_path / "w.htsr"
    path.write_bytes(encode(np.zeros((2, 3), dtype=np.float32))[:9])
    with pytest.raises(TensorFormatError, match="truncated extents"):
        load_tensor(path)

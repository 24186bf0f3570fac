from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from equilib.errors import EquilibIOError, ShapeMismatchError
from equilib.tensor import decode_tensor, encode_tensor, read_tensor, write_tensor


def test_encoding_is_header_then_little_endian_doubles() -> None:
    array = np.arange(6, dtype=np.float64).reshape(1, 2, 3, 1)
    blob = encode_tensor(array)
    assert blob[:16] == np.array([1, 2, 3, 1], dtype="<u4").tobytes()
    assert len(blob) == 16 + 6 * 8
    np.testing.assert_array_equal(decode_tensor(blob), array)


def test_truncated_payload_is_an_io_error() -> None:
    blob = encode_tensor(np.ones((1, 1, 2, 2)))
    with pytest.raises(EquilibIOError, match="payload"):
        decode_tensor(blob[:-8], source="w.bin")
    with pytest.raises(EquilibIOError, match="header"):
        decode_tensor(blob[:3])


def test_only_rank_four_arrays_encode() -> None:
    with pytest.raises(ShapeMismatchError):
        encode_tensor(np.ones((2, 2)))


def test_write_then_read_file(tmp_path: Path) -> None:
    array = np.linspace(-1.0, 1.0, 12).reshape(3, 1, 1, 4)
    path = write_tensor(tmp_path / "nested" / "w.bin", array)
    np.testing.assert_array_equal(read_tensor(path), array)
    with pytest.raises(EquilibIOError):
        read_tensor(tmp_path / "missing.bin")

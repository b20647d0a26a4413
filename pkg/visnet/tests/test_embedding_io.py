"""
Тесты формата VNEB
"""

import struct

import numpy as np
import pytest

from utils.embedding_io import HEADER, read_embeddings, write_embeddings
from utils.errors import EXIT_INPUT_ERROR, EmbeddingFormatError


def test_layout_is_bit_exact(tmp_path):
    path = tmp_path / 'e.vneb'
    write_embeddings(path, np.array([[1.0, -2.0], [0.5, 3.0], [0.0, 1.5]]))
    payload = path.read_bytes()
    assert payload[:16] == b'VNEB' + struct.pack('<III', 1, 3, 2)
    assert payload[16:] == struct.pack('<6f', 1.0, -2.0, 0.5, 3.0, 0.0, 1.5)


def test_read_returns_float32(tmp_path, rng):
    path = tmp_path / 'e.vneb'
    matrix = rng.normal(size=(4, 3))
    write_embeddings(path, matrix)
    out = read_embeddings(path)
    assert out.dtype == np.float32
    assert np.array_equal(out, matrix.astype(np.float32))


@pytest.mark.parametrize('payload', [
    b'VNE',
    b'XXXX' + struct.pack('<III', 1, 1, 1) + b'\0' * 4,
    b'VNEB' + struct.pack('<III', 2, 1, 1) + b'\0' * 4,
    b'VNEB' + struct.pack('<III', 1, 1, 0),
    b'VNEB' + struct.pack('<III', 1, 2, 2) + b'\0' * 8,
])
def test_corrupt_files_are_rejected(tmp_path, payload):
    path = tmp_path / 'bad.vneb'
    path.write_bytes(payload)
    with pytest.raises(EmbeddingFormatError) as info:
        read_embeddings(path)
    assert str(path) in str(info.value)
    assert info.value.exit_code == EXIT_INPUT_ERROR


def test_missing_file(tmp_path):
    with pytest.raises(EmbeddingFormatError):
        read_embeddings(tmp_path / 'none.vneb')


def test_header_size():
    assert HEADER.size == 16

"""
Модуль файлов эмбеддингов VNEB

Формат: магия b'VNEB', версия u32 = 1, число строк u32, размерность u32,
затем count·dim чисел float32 little-endian построчно.
"""

import struct
from pathlib import Path
from typing import Union

import numpy as np

from .errors import EmbeddingFormatError


MAGIC = b'VNEB'
VERSION = 1
HEADER = struct.Struct('<4sIII')
DTYPE = np.dtype('<f4')


def write_embeddings(path: Union[str, Path], matrix: np.ndarray):
    """
    Сохраняет матрицу [count, dim] в VNEB

    Args:
        path: Путь к файлу
        matrix: Эмбеддинги (приводятся к float32)
    """
    matrix = np.asarray(matrix)
    if matrix.ndim != 2:
        raise ValueError(f"ожидается матрица [count, dim], получено {matrix.shape}")
    count, dim = matrix.shape
    with open(path, 'wb') as f:
        f.write(HEADER.pack(MAGIC, VERSION, count, dim))
        f.write(np.ascontiguousarray(matrix, dtype=DTYPE).tobytes())


def read_embeddings(path: Union[str, Path]) -> np.ndarray:
    """
    Читает VNEB

    Args:
        path: Путь к файлу

    Returns:
        Матрица [count, dim], float32
    """
    path = Path(path)
    try:
        payload = path.read_bytes()
    except OSError as e:
        raise EmbeddingFormatError(f"не удалось прочитать файл: {e}", str(path)) from e

    if len(payload) < HEADER.size:
        raise EmbeddingFormatError(f"файл короче заголовка ({len(payload)} байт)", str(path))
    magic, version, count, dim = HEADER.unpack_from(payload)
    if magic != MAGIC:
        raise EmbeddingFormatError(f"неверная сигнатура {magic!r}", str(path))
    if version != VERSION:
        raise EmbeddingFormatError(f"неподдерживаемая версия {version}", str(path))
    if dim == 0:
        raise EmbeddingFormatError("нулевая размерность", str(path))

    expected = HEADER.size + count * dim * DTYPE.itemsize
    if len(payload) != expected:
        raise EmbeddingFormatError(f"ожидается {expected} байт, в файле {len(payload)}", str(path))
    return np.frombuffer(payload, dtype=DTYPE, offset=HEADER.size).reshape(count, dim).copy()

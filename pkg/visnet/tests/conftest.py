"""
Общие фикстуры тестов
"""

import numpy as np
import pytest


@pytest.fixture
def rng() -> np.random.Generator:
    """Генератор с фиксированным зерном"""
    return np.random.default_rng(12345)

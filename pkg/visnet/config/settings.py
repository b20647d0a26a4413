"""
Глобальные настройки лаборатории

Журналы, нормализация по батчу и допуски проверки градиентов.
"""

import logging
from dataclasses import dataclass
from typing import Tuple


@dataclass
class Settings:
    """
    Основные настройки приложения

    Содержит глобальные параметры численного ядра и логирования.
    """

    # === Логирование ===
    log_level: int = logging.INFO

    # Имена файлов журналов в выходном каталоге
    metrics_log_name: str = 'metrics.log'
    weights_log_name: str = 'dwa_weights.log'

    # === Батч-нормализация ===
    bn_momentum: float = 0.1
    bn_eps: float = 1e-5

    # === Проверка градиентов ===
    # Шаг центральной разности (двойная точность)
    grad_check_step: float = 1e-5

    # Порог относительной ошибки
    grad_check_tolerance: float = 1e-4

    # === Нормализация изображений ===
    # Статистики каналов ImageNet, шкала [0, 1]
    normalize_mean: Tuple[float, float, float] = (0.485, 0.456, 0.406)
    normalize_std: Tuple[float, float, float] = (0.229, 0.224, 0.225)

    def __post_init__(self):
        """Валидация настроек после инициализации"""
        if not 0.0 < self.bn_momentum <= 1.0:
            raise ValueError("bn_momentum должен лежать в (0, 1]")

        if self.bn_eps <= 0:
            raise ValueError("bn_eps должен быть положительным")

        if self.grad_check_step <= 0:
            raise ValueError("grad_check_step должен быть положительным")

        if len(self.normalize_mean) != 3 or len(self.normalize_std) != 3:
            raise ValueError("статистики нормализации задаются по трем каналам")

        if any(s <= 0 for s in self.normalize_std):
            raise ValueError("normalize_std должны быть положительными")


# Глобальный экземпляр настроек
settings = Settings()

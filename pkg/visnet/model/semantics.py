"""
Модуль семантической кластеризации

Псевдометки по правилам (вертикальное разбиение + порог по норме
признака) и семантическая голова, классифицирующая каждую позицию.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Sequence, Union

import numpy as np
from PIL import Image

from autodiff import Tensor, ops
from autodiff.ops import Mode, RunningStats
from utils.errors import DimensionError

from .fusion import he_normal


UPPER, LOWER, SHOES, BACKGROUND = 0, 1, 2, 3
NUM_SEMANTIC_CLASSES = 4

UPPER_LIMIT = 0.4
LOWER_LIMIT = 0.8
FOREGROUND_SIGMA = 0.5

# Палитра отладочного дампа: верх, низ, обувь, фон
LABEL_PALETTE = np.array([
    [255, 0, 0],
    [0, 255, 0],
    [0, 0, 255],
    [0, 0, 0],
], dtype=np.uint8)


def spatial_class(y_norm: float) -> int:
    """
    Класс по вертикальной координате

    Args:
        y_norm: Нормированная координата строки в [0, 1), верх = 0

    Returns:
        0 (верх, y < 0.4), 1 (низ, 0.4 ≤ y < 0.8), 2 (обувь, y ≥ 0.8)
    """
    if not 0.0 <= y_norm < 1.0:
        raise ValueError(f"координата вне [0, 1): {y_norm}")
    if y_norm < UPPER_LIMIT:
        return UPPER
    if y_norm < LOWER_LIMIT:
        return LOWER
    return SHOES


def row_classes(height: int) -> np.ndarray:
    """Классы строк карты высоты height при y = row / height"""
    return np.array([spatial_class(row / height) for row in range(height)], dtype=np.int64)


@dataclass
class ForegroundMask:
    """
    Маска переднего плана

    Attributes:
        mask: Булева сетка [B, H, W]
        magnitudes: Нормы признаков [B, H, W]
        mean: Среднее нормы по изображению [B]
        std: Стандартное отклонение (генеральное) [B]
    """
    mask: np.ndarray
    magnitudes: np.ndarray
    mean: np.ndarray
    std: np.ndarray


def _as_array(fused: Union[Tensor, np.ndarray]) -> np.ndarray:
    data = fused.data if isinstance(fused, Tensor) else np.asarray(fused, dtype=np.float64)
    if data.ndim != 4:
        raise DimensionError(f"ожидается карта [B, D, H, W], получено {data.shape}")
    return data


def foreground_mask(fused: Union[Tensor, np.ndarray]) -> ForegroundMask:
    """
    Порог переднего плана: норма > μ + 0.5σ (строго)

    Args:
        fused: Слитая карта [B, D, H, W]

    Returns:
        Маска и статистики по изображениям
    """
    data = _as_array(fused)
    magnitudes = np.sqrt(np.sum(data * data, axis=1))
    batch = magnitudes.shape[0]
    flat = magnitudes.reshape(batch, -1)

    mean = flat.mean(axis=1)
    std = flat.std(axis=1)
    # Однородная карта: σ = 0 ровно, иначе округление среднего дает ложный передний план
    uniform = flat.max(axis=1) == flat.min(axis=1)
    mean = np.where(uniform, flat[:, 0], mean)
    std = np.where(uniform, 0.0, std)

    threshold = mean + FOREGROUND_SIGMA * std
    mask = magnitudes > threshold[:, None, None]
    return ForegroundMask(mask=mask, magnitudes=magnitudes, mean=mean, std=std)


@dataclass
class PseudoLabelMap:
    """
    Псевдометки позиций

    Attributes:
        labels: Метки [B, H, W] в {0, 1, 2, 3}
        foreground: Маска переднего плана [B, H, W]
        mean: Среднее нормы по изображению [B]
        std: Стандартное отклонение нормы [B]
    """
    labels: np.ndarray
    foreground: np.ndarray
    mean: np.ndarray
    std: np.ndarray

    def flat(self) -> np.ndarray:
        """Метки в порядке строк семантической головы (b, y, x)"""
        return self.labels.reshape(-1)

    def counts(self) -> Dict[int, int]:
        values, counts = np.unique(self.labels, return_counts=True)
        return {int(v): int(c) for v, c in zip(values, counts)}


def pseudo_labels(fused: Union[Tensor, np.ndarray]) -> PseudoLabelMap:
    """
    Псевдометки: пространственный класс на переднем плане, 3 на фоне

    Метки не участвуют в дифференцировании.

    Args:
        fused: Слитая карта [B, D, H, W]

    Returns:
        Карта псевдометок
    """
    fg = foreground_mask(fused)
    height = fg.mask.shape[1]
    rows = row_classes(height)[None, :, None]
    labels = np.where(fg.mask, rows, BACKGROUND).astype(np.int64)
    return PseudoLabelMap(labels=labels, foreground=fg.mask, mean=fg.mean, std=fg.std)


def save_label_image(labels: np.ndarray, path: Union[str, Path]):
    """
    Сохраняет карту меток [H, W] как цветное изображение

    Args:
        labels: Метки одного изображения
        path: Путь к PNG
    """
    labels = np.asarray(labels)
    if labels.ndim != 2:
        raise DimensionError(f"ожидается карта [H, W], получено {labels.shape}")
    Image.fromarray(LABEL_PALETTE[labels]).save(path)


@dataclass
class SemanticHeadParams:
    """
    Семантическая голова: 2048 -> 1024 -> 512 -> 4, BN + ReLU + dropout
    после скрытых слоев

    Attributes:
        weights: Веса слоев [out, in]
        biases: Смещения слоев (None - слой без смещения)
        gammas: Масштабы BN скрытых слоев
        betas: Сдвиги BN скрытых слоев
        running: Скользящие статистики BN
        dropout: Доля dropout
        eps: eps BN
    """
    weights: Sequence[Tensor]
    biases: Sequence[Optional[Tensor]]
    gammas: Sequence[Tensor]
    betas: Sequence[Tensor]
    running: Sequence[RunningStats]
    dropout: float = 0.1
    eps: float = ops.BN_EPS

    def __post_init__(self):
        if self.weights[-1].shape[0] != NUM_SEMANTIC_CLASSES:
            raise DimensionError(
                f"выход семантической головы {self.weights[-1].shape[0]} вместо {NUM_SEMANTIC_CLASSES}"
            )
        if not len(self.weights) == len(self.biases) == len(self.gammas) + 1 == len(self.running) + 1:
            raise DimensionError("число слоев семантической головы не согласовано")

    @classmethod
    def initialize(
        cls,
        rng: np.random.Generator,
        dim: int = 2048,
        hidden: Sequence[int] = (1024, 512),
        dropout: float = 0.1,
        momentum: float = ops.BN_MOMENTUM,
        eps: float = ops.BN_EPS,
        hidden_bias: bool = True
    ) -> 'SemanticHeadParams':
        widths = [dim, *hidden, NUM_SEMANTIC_CLASSES]
        weights, biases = [], []
        last = len(widths) - 2
        for layer, (fan_in, fan_out) in enumerate(zip(widths, widths[1:])):
            weights.append(he_normal(rng, fan_out, fan_in))
            # Смещение перед BN в режиме train не влияет на выход
            has_bias = hidden_bias or layer == last
            biases.append(Tensor(np.zeros(fan_out), requires_grad=True) if has_bias else None)
        return cls(
            weights=weights,
            biases=biases,
            gammas=[Tensor(np.ones(h), requires_grad=True) for h in hidden],
            betas=[Tensor(np.zeros(h), requires_grad=True) for h in hidden],
            running=[RunningStats.fresh(h, momentum) for h in hidden],
            dropout=dropout,
            eps=eps,
        )

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    def named_parameters(self) -> Dict[str, Tensor]:
        params: Dict[str, Tensor] = {}
        for index, (w, b) in enumerate(zip(self.weights, self.biases), start=1):
            params[f"fc{index}.weight"] = w
            if b is not None:
                params[f"fc{index}.bias"] = b
        for index, (g, be) in enumerate(zip(self.gammas, self.betas), start=1):
            params[f"bn{index}.gamma"] = g
            params[f"bn{index}.beta"] = be
        return params


def flatten_locations(fused: Tensor) -> Tensor:
    """[B, D, H, W] -> [B·H·W, D], порядок строк (b, y, x)"""
    batch, dim, height, width = fused.shape
    return ops.reshape(ops.transpose(fused, (0, 2, 3, 1)), (batch * height * width, dim))


def semantic_head_forward(
    fused: Tensor,
    params: SemanticHeadParams,
    mode: Mode = 'train',
    rng: Optional[np.random.Generator] = None
) -> Tensor:
    """
    Семантические логиты каждой позиции

    BN скрытых слоев считается по всем позициям батча как по отдельным
    примерам.

    Args:
        fused: Слитая карта [B, D, H, W]
        params: Параметры головы
        mode: 'train' или 'eval' (dropout только в train)
        rng: Генератор масок dropout

    Returns:
        Логиты [B·H·W, 4]
    """
    if fused.ndim != 4 or fused.shape[1] != params.input_dim:
        raise DimensionError(
            f"семантическая голова ожидает {params.input_dim} каналов, вход {fused.shape}"
        )
    x = flatten_locations(fused)
    hidden_layers = len(params.gammas)
    for index in range(hidden_layers):
        x = ops.dense(x, params.weights[index], params.biases[index])
        x = ops.batchnorm_forward(x, params.gammas[index], params.betas[index],
                                  params.eps, mode, params.running[index])
        x = ops.relu(x)
        x = ops.dropout(x, params.dropout, rng, mode)
    return ops.dense(x, params.weights[-1], params.biases[-1])

"""
Преобразования обучения

Цепочка: resize 256×128 -> отступ 10 -> случайная обрезка -> отражение
-> color jitter -> нормализация по статистикам каналов -> random erasing.
Цепочка оценки: resize и нормализация.
"""

from dataclasses import dataclass, fields
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
from PIL import Image, ImageEnhance

from autodiff import Tensor
from config.run_config import check_field_value
from config.settings import settings as global_settings
from utils.errors import ConfigurationError, ImageError

from .color import adjust_hsv


ERASE_ATTEMPTS = 10


@dataclass
class TransformSettings:
    """
    Параметры цепочки

    Attributes:
        height: Высота выхода
        width: Ширина выхода
        padding: Отступ перед обрезкой
        flip_probability: Вероятность отражения
        brightness: Разброс яркости
        contrast: Разброс контраста
        saturation: Разброс насыщенности
        hue: Разброс тона (доля круга, ≤ 0.5)
        erase_probability: Вероятность стирания
        erase_area: Доля площади стираемого прямоугольника
        erase_aspect: Отношение сторон стираемого прямоугольника
        mean: Средние каналов
        std: СКО каналов
    """
    height: int = 256
    width: int = 128
    padding: int = 10
    flip_probability: float = 0.5
    brightness: float = 0.2
    contrast: float = 0.15
    saturation: float = 0.15
    hue: float = 0.1
    erase_probability: float = 0.5
    erase_area: Tuple[float, float] = (0.02, 0.4)
    erase_aspect: Tuple[float, float] = (0.3, 3.3)
    mean: Tuple[float, float, float] = global_settings.normalize_mean
    std: Tuple[float, float, float] = global_settings.normalize_std

    def __post_init__(self):
        if self.height <= 0 or self.width <= 0 or self.padding < 0:
            raise ConfigurationError("размеры должны быть положительными", 'transform.size')
        for name in ('flip_probability', 'erase_probability'):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigurationError("вероятность вне [0, 1]", f"transform.{name}")
        if not 0.0 <= self.hue <= 0.5:
            raise ConfigurationError(f"hue вне [0, 0.5]: {self.hue}", 'transform.hue')
        for name in ('brightness', 'contrast', 'saturation'):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ConfigurationError("разброс вне [0, 1)", f"transform.{name}")
        lo, hi = self.erase_area
        if not 0.0 < lo <= hi < 1.0:
            raise ConfigurationError(f"доля площади ({lo}, {hi}) вне (0, 1)", 'transform.erase_area')
        if any(s <= 0 for s in self.std):
            raise ConfigurationError("СКО каналов должны быть положительными", 'transform.std')

    @classmethod
    def from_dict(cls, data: Dict[str, Any], **overrides) -> 'TransformSettings':
        """
        Создает параметры из словаря (раздел JSON-конфигурации)

        Args:
            data: Значения полей; неизвестные ключи - ошибка
            **overrides: Значения поверх data (например, mean и std раздела)
        """
        known = {f.name: f.type for f in fields(cls)}
        values: Dict[str, Any] = {}
        for key, value in {**data, **overrides}.items():
            if key not in known:
                raise ConfigurationError(f"неизвестный параметр {key!r}", f"transform.{key}")
            values[key] = check_field_value(known[key], value, f"transform.{key}")
        return cls(**values)

    @property
    def jitter_enabled(self) -> bool:
        return any(v > 0 for v in (self.brightness, self.contrast, self.saturation, self.hue))


@dataclass
class TransformResult:
    """
    Результат цепочки

    Attributes:
        tensor: Нормализованное изображение [3, H, W]
        crop_offset: (top, left) обрезки в дополненном изображении
        flipped: Было ли отражение
        erased: (top, left, height, width) стертого прямоугольника или None
    """
    tensor: Tensor
    crop_offset: Tuple[int, int]
    flipped: bool
    erased: Optional[Tuple[int, int, int, int]] = None

    @property
    def erased_fraction(self) -> float:
        if self.erased is None:
            return 0.0
        _, _, h, w = self.erased
        _, height, width = self.tensor.shape
        return h * w / (height * width)


def _as_pil(image: Union[np.ndarray, Image.Image]) -> Image.Image:
    if isinstance(image, Image.Image):
        if image.mode != 'RGB':
            raise ImageError(f"ожидается цветное изображение, режим {image.mode}")
        return image
    array = np.asarray(image)
    if array.ndim != 3 or array.shape[2] != 3:
        raise ImageError(f"ожидается цветное изображение [H, W, 3], получено {array.shape}")
    return Image.fromarray(array.astype(np.uint8))


class TrainTransforms:
    """
    Случайная цепочка преобразований обучения
    """

    def __init__(self, settings: Optional[TransformSettings] = None):
        """
        Инициализация цепочки

        Args:
            settings: Параметры (по умолчанию - стандартные)
        """
        self.settings = settings or TransformSettings()

    def _jitter(self, image: Image.Image, rng: np.random.Generator) -> Image.Image:
        s = self.settings
        if s.brightness > 0:
            image = ImageEnhance.Brightness(image).enhance(rng.uniform(1 - s.brightness, 1 + s.brightness))
        if s.contrast > 0:
            image = ImageEnhance.Contrast(image).enhance(rng.uniform(1 - s.contrast, 1 + s.contrast))
        if s.saturation > 0:
            image = ImageEnhance.Color(image).enhance(rng.uniform(1 - s.saturation, 1 + s.saturation))
        if s.hue > 0:
            shifted = adjust_hsv(np.asarray(image, dtype=np.float64) / 255.0, rng.uniform(-s.hue, s.hue))
            image = Image.fromarray(np.round(shifted * 255.0).astype(np.uint8))
        return image

    def _erase(self, tensor: np.ndarray, rng: np.random.Generator) -> Optional[Tuple[int, int, int, int]]:
        s = self.settings
        _, height, width = tensor.shape
        area = height * width
        log_lo, log_hi = np.log(s.erase_aspect[0]), np.log(s.erase_aspect[1])
        for _ in range(ERASE_ATTEMPTS):
            target = rng.uniform(*s.erase_area) * area
            aspect = np.exp(rng.uniform(log_lo, log_hi))
            h = int(round(np.sqrt(target * aspect)))
            w = int(round(np.sqrt(target / aspect)))
            if not (0 < h < height and 0 < w < width):
                continue
            # Округление сторон не должно выводить долю за пределы диапазона
            if not s.erase_area[0] <= h * w / area <= s.erase_area[1]:
                continue
            top = int(rng.integers(0, height - h + 1))
            left = int(rng.integers(0, width - w + 1))
            tensor[:, top:top + h, left:left + w] = 0.0
            return top, left, h, w
        return None

    def __call__(self, image: Union[np.ndarray, Image.Image], rng: np.random.Generator) -> TransformResult:
        """
        Применяет цепочку

        Args:
            image: Цветное изображение любого размера
            rng: Генератор

        Returns:
            Тензор [3, H, W] и след случайных решений
        """
        s = self.settings
        picture = _as_pil(image).resize((s.width, s.height), Image.Resampling.BILINEAR)

        array = np.asarray(picture)
        if s.padding:
            array = np.pad(array, ((s.padding, s.padding), (s.padding, s.padding), (0, 0)))
        top = int(rng.integers(0, 2 * s.padding + 1))
        left = int(rng.integers(0, 2 * s.padding + 1))
        array = array[top:top + s.height, left:left + s.width]

        flipped = bool(rng.random() < s.flip_probability)
        if flipped:
            array = array[:, ::-1]

        picture = Image.fromarray(np.ascontiguousarray(array))
        if s.jitter_enabled:
            picture = self._jitter(picture, rng)

        tensor = normalize(np.asarray(picture), s.mean, s.std)
        erased = None
        if rng.random() < s.erase_probability:
            erased = self._erase(tensor, rng)
        return TransformResult(Tensor(tensor), (top, left), flipped, erased)


class EvalTransforms:
    """
    Детерминированная цепочка оценки: resize и нормализация
    """

    def __init__(self, settings: Optional[TransformSettings] = None):
        self.settings = settings or TransformSettings()

    def __call__(self, image: Union[np.ndarray, Image.Image]) -> Tensor:
        """
        Применяет цепочку

        Args:
            image: Цветное изображение любого размера

        Returns:
            Тензор [3, H, W]
        """
        s = self.settings
        picture = _as_pil(image).resize((s.width, s.height), Image.Resampling.BILINEAR)
        return Tensor(normalize(np.asarray(picture), s.mean, s.std))


def _statistics(
    mean: Optional[Tuple[float, float, float]],
    std: Optional[Tuple[float, float, float]]
) -> Tuple[np.ndarray, np.ndarray]:
    mean = global_settings.normalize_mean if mean is None else mean
    std = global_settings.normalize_std if std is None else std
    return np.asarray(mean, dtype=np.float64)[:, None, None], np.asarray(std, dtype=np.float64)[:, None, None]


def normalize(
    image: np.ndarray,
    mean: Optional[Tuple[float, float, float]] = None,
    std: Optional[Tuple[float, float, float]] = None
) -> np.ndarray:
    """RGB uint8 [H, W, 3] -> нормализованный [3, H, W]; по умолчанию статистики из settings"""
    m, s = _statistics(mean, std)
    x = np.asarray(image, dtype=np.float64).transpose(2, 0, 1) / 255.0
    return (x - m) / s


def denormalize(
    tensor: Union[Tensor, np.ndarray],
    mean: Optional[Tuple[float, float, float]] = None,
    std: Optional[Tuple[float, float, float]] = None
) -> np.ndarray:
    """Нормализованный [3, H, W] -> RGB uint8 [H, W, 3]"""
    m, s = _statistics(mean, std)
    data = tensor.data if isinstance(tensor, Tensor) else np.asarray(tensor, dtype=np.float64)
    x = data * s + m
    return np.clip(np.round(x * 255.0), 0, 255).astype(np.uint8).transpose(1, 2, 0)


def train_transforms(
    image: Union[np.ndarray, Image.Image],
    rng: np.random.Generator,
    settings: Optional[TransformSettings] = None
) -> TransformResult:
    """Цепочка преобразований обучения с заданными параметрами"""
    return TrainTransforms(settings)(image, rng)


def eval_transforms(
    image: Union[np.ndarray, Image.Image],
    settings: Optional[TransformSettings] = None
) -> Tensor:
    """Цепочка оценки с заданными параметрами"""
    return EvalTransforms(settings)(image)

"""
Конфигурация аугментации фона

Вероятность p и сила λ по категориям, диапазоны параметров и наборы
вариантов каждой категории.
"""

from dataclasses import dataclass, field, fields
from typing import Any, Dict, Tuple

from config.run_config import check_field_value
from utils.errors import ConfigurationError


# Порядок применения категорий
CATEGORIES = ('color', 'texture', 'noise', 'blur', 'pattern', 'gradient')

VARIANTS = {
    'texture': ('edges', 'emboss'),
    'noise': ('gaussian', 'salt_pepper'),
    'blur': ('motion', 'zoom'),
    'pattern': ('grid', 'circles', 'stripes'),
    'gradient': ('linear', 'radial', 'angular'),
}

# Допустимые границы диапазонов
HUE_BOUNDS = (30.0, 150.0)
SATURATION_BOUNDS = (1.0, 2.0)
BRIGHTNESS_BOUNDS = (0.7, 1.3)
NOISE_VARIANCE_BOUNDS = (0.01, 0.05)


def _per_category(value: float) -> Dict[str, float]:
    return {category: value for category in CATEGORIES}


@dataclass
class AugmentConfig:
    """
    Настройки аугментации

    Attributes:
        probability: Вероятность применения по категориям
        strength: Сила смешивания λ по категориям
        hue_range: Поворот тона, градусы
        saturation_range: Множитель насыщенности
        brightness_range: Множитель яркости
        noise_variance: Дисперсия гауссова шума (шкала [0, 1])
        salt_pepper_amount: Доля пикселей соли/перца
        pattern_pitch: Шаг узора, пиксели
        line_width: Толщина линий узора, пиксели
        zoom_range: Максимальное увеличение радиального размытия
        texture_variants: Включенные варианты текстуры
        noise_variants: Включенные варианты шума
        blur_variants: Включенные варианты размытия
        pattern_variants: Включенные варианты узора
        gradient_variants: Включенные варианты градиента
    """
    probability: Dict[str, float] = field(default_factory=lambda: _per_category(0.5))
    strength: Dict[str, float] = field(default_factory=lambda: _per_category(0.7))
    hue_range: Tuple[float, float] = HUE_BOUNDS
    saturation_range: Tuple[float, float] = SATURATION_BOUNDS
    brightness_range: Tuple[float, float] = BRIGHTNESS_BOUNDS
    noise_variance: Tuple[float, float] = NOISE_VARIANCE_BOUNDS
    salt_pepper_amount: Tuple[float, float] = (0.01, 0.05)
    pattern_pitch: Tuple[int, int] = (8, 32)
    line_width: Tuple[int, int] = (1, 3)
    zoom_range: Tuple[float, float] = (1.05, 1.2)
    texture_variants: Tuple[str, ...] = VARIANTS['texture']
    noise_variants: Tuple[str, ...] = VARIANTS['noise']
    blur_variants: Tuple[str, ...] = VARIANTS['blur']
    pattern_variants: Tuple[str, ...] = VARIANTS['pattern']
    gradient_variants: Tuple[str, ...] = VARIANTS['gradient']

    def __post_init__(self):
        self.probability = {**_per_category(0.5), **self.probability}
        self.strength = {**_per_category(0.7), **self.strength}
        self._validate()

    @classmethod
    def uniform(cls, probability: float, strength: float, **kwargs) -> 'AugmentConfig':
        """Одинаковые p и λ для всех категорий"""
        return cls(probability=_per_category(probability), strength=_per_category(strength), **kwargs)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'AugmentConfig':
        """
        Создает настройки из словаря (раздел JSON-конфигурации)

        Значения проверяются по типам полей, списки приводятся к кортежам;
        неизвестные ключи - ошибка.
        """
        known = {f.name: f.type for f in fields(cls)}
        values: Dict[str, Any] = {}
        for key, value in data.items():
            if key not in known:
                raise ConfigurationError(f"неизвестный параметр {key!r}", f"augment.{key}")
            values[key] = check_field_value(known[key], value, f"augment.{key}")
        return cls(**values)

    def variants(self, category: str) -> Tuple[str, ...]:
        return getattr(self, f"{category}_variants")

    def _validate(self):
        for table_name in ('probability', 'strength'):
            table = getattr(self, table_name)
            for category, value in table.items():
                if category not in CATEGORIES:
                    raise ConfigurationError(f"неизвестная категория {category!r}", f"augment.{table_name}")
                if not 0.0 <= value <= 1.0:
                    raise ConfigurationError(
                        f"значение {value} вне [0, 1]", f"augment.{table_name}.{category}"
                    )

        bounded = (
            ('hue_range', HUE_BOUNDS),
            ('saturation_range', SATURATION_BOUNDS),
            ('brightness_range', BRIGHTNESS_BOUNDS),
            ('noise_variance', NOISE_VARIANCE_BOUNDS),
        )
        for name, (low, high) in bounded:
            lo, hi = getattr(self, name)
            if not low <= lo <= hi <= high:
                raise ConfigurationError(f"диапазон ({lo}, {hi}) вне [{low}, {high}]", f"augment.{name}")

        for name in ('salt_pepper_amount', 'pattern_pitch', 'line_width', 'zoom_range'):
            lo, hi = getattr(self, name)
            if not 0 < lo <= hi:
                raise ConfigurationError(f"некорректный диапазон ({lo}, {hi})", f"augment.{name}")
        if self.salt_pepper_amount[1] > 1.0:
            raise ConfigurationError("доля пикселей больше 1", 'augment.salt_pepper_amount')
        if self.zoom_range[0] < 1.0:
            raise ConfigurationError("увеличение меньше 1", 'augment.zoom_range')

        for category, known in VARIANTS.items():
            chosen = self.variants(category)
            if not chosen:
                raise ConfigurationError("пустой набор вариантов", f"augment.{category}_variants")
            unknown = [v for v in chosen if v not in known]
            if unknown:
                raise ConfigurationError(f"неизвестные варианты {unknown}", f"augment.{category}_variants")

"""
Модуль аугментации фона

Фон изображения меняется одной или несколькими категориями
преобразований, человек по маске переносится без изменений:
out = M·I + (1 − M)·T(I).
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, Optional

import numpy as np
from PIL import Image, ImageDraw, ImageFilter

from utils.errors import ConfigurationError, DimensionError, ImageError

from .color import adjust_hsv
from .config import CATEGORIES, AugmentConfig


@dataclass
class MaskedImage:
    """
    Изображение с маской человека

    Attributes:
        image: RGB [H, W, 3], uint8
        mask: Маска [H, W], True - человек
    """
    image: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        self.image = np.asarray(self.image)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.image.ndim != 3 or self.image.shape[2] != 3 or self.image.dtype != np.uint8:
            raise ImageError(f"ожидается RGB uint8 [H, W, 3], получено {self.image.shape} {self.image.dtype}")
        if self.mask.shape != self.image.shape[:2]:
            raise DimensionError(f"маска {self.mask.shape} для изображения {self.image.shape[:2]}")


def composite(src: MaskedImage, transformed_bg: np.ndarray) -> np.ndarray:
    """
    Сборка: пиксели человека из src, остальное из transformed_bg

    Args:
        src: Исходное изображение с маской
        transformed_bg: Преобразованный фон того же размера

    Returns:
        Изображение uint8
    """
    transformed_bg = np.asarray(transformed_bg)
    if transformed_bg.shape != src.image.shape:
        raise DimensionError(f"фон {transformed_bg.shape} для изображения {src.image.shape}")
    return np.where(src.mask[..., None], src.image, transformed_bg).astype(np.uint8)


# === Эффекты категорий: float [H, W, 3] в шкале 0..255 ===

def _color_effect(bg: np.ndarray, rng: np.random.Generator, cfg: AugmentConfig) -> np.ndarray:
    theta = rng.uniform(*cfg.hue_range)
    saturation = rng.uniform(*cfg.saturation_range)
    brightness = rng.uniform(*cfg.brightness_range)
    return adjust_hsv(bg / 255.0, theta / 360.0, saturation, brightness) * 255.0


def _texture_effect(bg: np.ndarray, rng: np.random.Generator, cfg: AugmentConfig) -> np.ndarray:
    variant = rng.choice(cfg.texture_variants)
    image = Image.fromarray(bg)
    if variant == 'emboss':
        return np.asarray(image.filter(ImageFilter.EMBOSS), dtype=np.float64)
    edges = np.asarray(image.filter(ImageFilter.FIND_EDGES), dtype=np.float64)
    return np.clip(bg.astype(np.float64) + edges, 0.0, 255.0)


def _noise_effect(bg: np.ndarray, rng: np.random.Generator, cfg: AugmentConfig) -> np.ndarray:
    variant = rng.choice(cfg.noise_variants)
    base = bg.astype(np.float64)
    if variant == 'gaussian':
        variance = rng.uniform(*cfg.noise_variance)
        return base + rng.normal(0.0, np.sqrt(variance) * 255.0, size=base.shape)
    amount = rng.uniform(*cfg.salt_pepper_amount)
    hit = rng.random(base.shape[:2]) < amount
    salt = rng.random(base.shape[:2]) < 0.5
    noisy = base.copy()
    noisy[hit & salt] = 255.0
    noisy[hit & ~salt] = 0.0
    return noisy


def _motion_kernel(orientation: int) -> np.ndarray:
    kernel = np.zeros((5, 5))
    if orientation == 0:
        kernel[2, :] = 1.0
    elif orientation == 1:
        kernel[:, 2] = 1.0
    elif orientation == 2:
        np.fill_diagonal(kernel, 1.0)
    else:
        np.fill_diagonal(np.fliplr(kernel), 1.0)
    return kernel


def _blur_effect(bg: np.ndarray, rng: np.random.Generator, cfg: AugmentConfig) -> np.ndarray:
    variant = rng.choice(cfg.blur_variants)
    image = Image.fromarray(bg)
    if variant == 'motion':
        kernel = _motion_kernel(int(rng.integers(0, 4)))
        blurred = image.filter(ImageFilter.Kernel((5, 5), kernel.ravel().tolist(), scale=float(kernel.sum())))
        return np.asarray(blurred, dtype=np.float64)

    # Радиальное размытие: среднее копий, увеличенных к центру
    width, height = image.size
    max_zoom = rng.uniform(*cfg.zoom_range)
    copies = []
    for zoom in np.linspace(1.0, max_zoom, 5):
        crop_w, crop_h = width / zoom, height / zoom
        left, top = (width - crop_w) / 2.0, (height - crop_h) / 2.0
        zoomed = image.resize((width, height), Image.Resampling.BILINEAR,
                              box=(left, top, left + crop_w, top + crop_h))
        copies.append(np.asarray(zoomed, dtype=np.float64))
    return np.mean(copies, axis=0)


def _random_color(rng: np.random.Generator) -> tuple:
    return tuple(int(c) for c in rng.integers(0, 256, size=3))


def _pattern_effect(bg: np.ndarray, rng: np.random.Generator, cfg: AugmentConfig) -> np.ndarray:
    variant = rng.choice(cfg.pattern_variants)
    pitch = int(rng.integers(cfg.pattern_pitch[0], cfg.pattern_pitch[1] + 1))
    line = int(rng.integers(cfg.line_width[0], cfg.line_width[1] + 1))
    color = _random_color(rng)
    height, width = bg.shape[:2]

    if variant == 'grid':
        image = Image.fromarray(bg)
        draw = ImageDraw.Draw(image)
        for x in range(0, width, pitch):
            draw.line([(x, 0), (x, height - 1)], fill=color, width=line)
        for y in range(0, height, pitch):
            draw.line([(0, y), (width - 1, y)], fill=color, width=line)
        return np.asarray(image, dtype=np.float64)

    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    if variant == 'stripes':
        angle = np.deg2rad(rng.uniform(0.0, 180.0))
        phase = (xs * np.cos(angle) + ys * np.sin(angle)) % pitch
    else:
        # Концентрические кольца вокруг случайного центра
        cx, cy = rng.uniform(0, width), rng.uniform(0, height)
        phase = np.hypot(xs - cx, ys - cy) % pitch
    out = bg.astype(np.float64).copy()
    out[phase < line] = color
    return out


def _gradient_effect(bg: np.ndarray, rng: np.random.Generator, cfg: AugmentConfig) -> np.ndarray:
    variant = rng.choice(cfg.gradient_variants)
    start = np.array(_random_color(rng), dtype=np.float64)
    stop = np.array(_random_color(rng), dtype=np.float64)
    height, width = bg.shape[:2]
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)

    if variant == 'linear':
        angle = rng.uniform(0.0, 2.0 * np.pi)
        proj = xs * np.cos(angle) + ys * np.sin(angle)
        span = proj.max() - proj.min()
        t = (proj - proj.min()) / span if span > 0 else np.zeros_like(proj)
    else:
        cx, cy = rng.uniform(0, width), rng.uniform(0, height)
        if variant == 'radial':
            dist = np.hypot(xs - cx, ys - cy)
            t = dist / dist.max() if dist.max() > 0 else np.zeros_like(dist)
        else:
            t = (np.arctan2(ys - cy, xs - cx) + np.pi) / (2.0 * np.pi)
    return (1.0 - t)[..., None] * start + t[..., None] * stop


EFFECTS: Dict[str, Callable[[np.ndarray, np.random.Generator, AugmentConfig], np.ndarray]] = {
    'color': _color_effect,
    'texture': _texture_effect,
    'noise': _noise_effect,
    'blur': _blur_effect,
    'pattern': _pattern_effect,
    'gradient': _gradient_effect,
}


def background_transform(
    bg: np.ndarray,
    category: str,
    strength: float,
    rng: np.random.Generator,
    cfg: Optional[AugmentConfig] = None
) -> np.ndarray:
    """
    Преобразование фона одной категорией

    out = round((1 − λ)·bg + λ·clip(effect(bg))); при λ = 0 вход возвращается
    без изменений, генератор расходуется так же.

    Args:
        bg: Фон RGB uint8 [H, W, 3]
        category: Категория из CATEGORIES
        strength: Сила λ в [0, 1]
        rng: Генератор
        cfg: Диапазоны параметров

    Returns:
        Фон uint8
    """
    if category not in EFFECTS:
        raise ConfigurationError(f"неизвестная категория {category!r}", 'category')
    if not 0.0 <= strength <= 1.0:
        raise ValueError(f"сила λ вне [0, 1]: {strength}")
    bg = np.asarray(bg)
    if bg.ndim != 3 or bg.shape[2] != 3 or bg.dtype != np.uint8:
        raise ImageError(f"ожидается RGB uint8 [H, W, 3], получено {bg.shape} {bg.dtype}")

    effect = np.clip(EFFECTS[category](bg, rng, cfg or AugmentConfig()), 0.0, 255.0)
    blended = (1.0 - strength) * bg.astype(np.float64) + strength * effect
    return np.clip(np.round(blended), 0.0, 255.0).astype(np.uint8)


def augment_pipeline(
    src: MaskedImage,
    cfg: AugmentConfig,
    rng: np.random.Generator,
    logger: Optional[logging.Logger] = None
) -> np.ndarray:
    """
    Последовательное применение категорий с вероятностью p и сборка

    Args:
        src: Изображение с маской
        cfg: Настройки
        rng: Генератор
        logger: Логгер

    Returns:
        Аугментированное изображение; пиксели человека совпадают с src
    """
    bg = src.image
    applied = []
    for category in CATEGORIES:
        if rng.random() < cfg.probability[category]:
            bg = background_transform(bg, category, cfg.strength[category], rng, cfg)
            applied.append(category)
    if logger:
        logger.debug(f"Категории фона: {','.join(applied) or 'нет'}")
    return composite(src, bg)

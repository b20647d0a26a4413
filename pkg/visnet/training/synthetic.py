"""
Синтетический датасет и замороженный stem

Изображения-"силуэты": прямоугольник человека из трех цветных полос
(верх 40%, середина 40%, низ 20%) на темном шумном фоне. Цвета полос -
случайное направление личности в цветовом пространстве плюс малый шум.
"""

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from autodiff import Tensor
from model.fusion import FeaturePyramid
from utils.errors import ConfigurationError

from .sampling import DatasetManifest, ManifestRecord


BAND_SHARES = (0.4, 0.4, 0.2)

# Множители яркости камер
CAMERA_BRIGHTNESS = (1.0, 0.9, 1.1)

QUERY_CAMERA = 0
GALLERY_CAMERAS = (1, 2)


@dataclass
class SyntheticConfig:
    """
    Параметры генератора

    Attributes:
        num_ids: Число личностей
        train_per_id: Обучающих изображений на личность
        query_per_id: Запросов на личность (камера 0)
        gallery_per_id: Изображений галереи на личность (камеры 1-2)
        height: Высота изображения
        width: Ширина изображения
        color_jitter: СКО сдвига цвета полосы между снимками
        pixel_noise: СКО попиксельного шума
        seed: Зерно
    """
    num_ids: int = 20
    train_per_id: int = 20
    query_per_id: int = 2
    gallery_per_id: int = 8
    height: int = 64
    width: int = 32
    color_jitter: float = 0.03
    pixel_noise: float = 0.02
    seed: int = 1


@dataclass
class SyntheticDataset:
    """
    Сгенерированный датасет

    Attributes:
        images: Изображения [N, H, W, 3], uint8
        manifest: Манифест (пути - имена в схеме Market-1501)
        palettes: Цвета полос личностей [num_ids, 3, 3]
    """
    images: np.ndarray
    manifest: DatasetManifest
    palettes: np.ndarray

    def __len__(self) -> int:
        return len(self.manifest)


def render_person(
    palette: np.ndarray,
    height: int,
    width: int,
    camid: int,
    rng: np.random.Generator,
    color_jitter: float = 0.03,
    pixel_noise: float = 0.02
) -> np.ndarray:
    """
    Рисует одно изображение личности

    Args:
        palette: Цвета полос [3, 3] в [0, 1]
        height: Высота
        width: Ширина
        camid: Камера (задает яркость)
        rng: Генератор
        color_jitter: СКО сдвига цвета полосы
        pixel_noise: СКО попиксельного шума

    Returns:
        Изображение [H, W, 3], uint8
    """
    image = 0.08 + rng.normal(0.0, 0.03, size=(height, width, 3))

    top = height // 16
    bottom = height - height // 16
    shift = int(rng.integers(-2, 3))
    left = width // 4 + shift
    right = width - width // 4 + shift

    person_height = bottom - top
    edges = [top]
    for share in BAND_SHARES[:-1]:
        edges.append(edges[-1] + int(round(share * person_height)))
    edges.append(bottom)

    for band, (start, stop) in enumerate(zip(edges, edges[1:])):
        color = palette[band] + rng.normal(0.0, color_jitter, size=3)
        image[start:stop, left:right] = color + rng.normal(0.0, pixel_noise, size=(stop - start, right - left, 3))

    image *= CAMERA_BRIGHTNESS[camid % len(CAMERA_BRIGHTNESS)]
    return np.round(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)


def generate_dataset(cfg: SyntheticConfig) -> SyntheticDataset:
    """
    Генерирует личности и изображения

    Обучающие снимки - со случайных камер, запросы - с камеры 0,
    галерея - с камер 1 и 2.

    Args:
        cfg: Параметры генератора

    Returns:
        Датасет с манифестом
    """
    if cfg.num_ids < 2:
        raise ConfigurationError(f"нужно хотя бы две личности, получено {cfg.num_ids}", 'num_ids')
    rng = np.random.default_rng(cfg.seed)
    palettes = rng.uniform(0.2, 1.0, size=(cfg.num_ids, len(BAND_SHARES), 3))

    images: List[np.ndarray] = []
    records: List[ManifestRecord] = []

    def add(pid: int, camid: int, split: str):
        index = len(images)
        images.append(render_person(palettes[pid], cfg.height, cfg.width, camid, rng,
                                    cfg.color_jitter, cfg.pixel_noise))
        records.append(ManifestRecord(f"{pid:04d}_c{camid}s1_{index:06d}_00.png", pid, camid, split))

    for pid in range(cfg.num_ids):
        for _ in range(cfg.train_per_id):
            add(pid, int(rng.integers(0, len(CAMERA_BRIGHTNESS))), 'train')
        for _ in range(cfg.query_per_id):
            add(pid, QUERY_CAMERA, 'query')
        for n in range(cfg.gallery_per_id):
            add(pid, GALLERY_CAMERAS[n % len(GALLERY_CAMERAS)], 'gallery')

    return SyntheticDataset(images=np.stack(images), manifest=DatasetManifest(records), palettes=palettes)


class FrozenStem:
    """
    Необучаемый stem: среднее по окну шага s и фиксированная случайная
    проекция 1×1 с ReLU для каждой из четырех стадий
    """

    def __init__(
        self,
        channels: Sequence[int] = (8, 16, 32, 64),
        strides: Sequence[int] = (1, 2, 4, 8),
        seed: int = 0
    ):
        """
        Инициализация stem

        Args:
            channels: Каналы стадий
            strides: Шаги стадий относительно изображения
            seed: Зерно фиксированных весов
        """
        if len(channels) != 4 or len(strides) != 4:
            raise ConfigurationError("stem описывает ровно четыре стадии", 'stem')
        if any(b != 2 * a for a, b in zip(strides, strides[1:])):
            raise ConfigurationError(f"шаги стадий должны удваиваться: {tuple(strides)}", 'stem.strides')
        self.channels = tuple(channels)
        self.strides = tuple(strides)
        rng = np.random.default_rng(seed)
        self._weights = [rng.normal(0.0, 1.0, size=(c, 3)) for c in self.channels]
        self._biases = [rng.normal(0.0, 0.1, size=c) for c in self.channels]

    def stage_shapes(self, height: int, width: int) -> List[Tuple[int, int]]:
        return [(height // s, width // s) for s in self.strides]

    def __call__(self, images: np.ndarray) -> FeaturePyramid:
        """
        Пирамида признаков

        Args:
            images: Изображения [B, H, W, 3], uint8

        Returns:
            Четыре стадии (без градиента)
        """
        batch, height, width, _ = images.shape
        if height % self.strides[-1] or width % self.strides[-1]:
            raise ConfigurationError(
                f"размер {height}×{width} не делится на шаг {self.strides[-1]}", 'stem.strides'
            )
        x = images.astype(np.float64).transpose(0, 3, 1, 2) / 255.0 - 0.5

        stages = []
        for weight, bias, stride in zip(self._weights, self._biases, self.strides):
            pooled = x.reshape(batch, 3, height // stride, stride, width // stride, stride).mean(axis=(3, 5))
            features = np.einsum('oc,bchw->bohw', weight, pooled) + bias[None, :, None, None]
            stages.append(Tensor(np.maximum(features, 0.0)))
        return FeaturePyramid(stages)

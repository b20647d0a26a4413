"""
Модуль чтения и записи изображений

Изображения - RGB uint8; маски - 8-битные оттенки серого рядом с
исходником (суффикс _mask), ненулевой пиксель - человек.
"""

import re
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ImageError


MASK_SUFFIX = '_mask'
AUG_SUFFIX = '_aug'
TRAIN_SUFFIX = '_train'
EVAL_SUFFIX = '_eval'
IMAGE_EXTENSIONS = ('.png', '.jpg', '.jpeg', '.bmp')

# Имена результатов: <stem>_aug<N>, <stem>_train<N>, <stem>_eval
GENERATED_STEM = re.compile(rf"(?:{AUG_SUFFIX}|{TRAIN_SUFFIX})\d+$|{EVAL_SUFFIX}$")


def load_image(path: Union[str, Path]) -> np.ndarray:
    """
    Читает изображение как RGB

    Args:
        path: Путь к файлу

    Returns:
        Массив [H, W, 3], uint8
    """
    try:
        with Image.open(path) as image:
            return np.asarray(image.convert('RGB'))
    except (OSError, UnidentifiedImageError) as e:
        raise ImageError(f"{path}: не удалось прочитать изображение: {e}") from e


def load_mask(path: Union[str, Path]) -> np.ndarray:
    """
    Читает маску человека

    Args:
        path: Путь к файлу маски

    Returns:
        Булева маска [H, W]
    """
    try:
        with Image.open(path) as image:
            return np.asarray(image.convert('L')) > 0
    except (OSError, UnidentifiedImageError) as e:
        raise ImageError(f"{path}: не удалось прочитать маску: {e}") from e


def save_image(image: np.ndarray, path: Union[str, Path]):
    """Сохраняет RGB uint8 [H, W, 3]"""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.asarray(image, dtype=np.uint8)).save(path)


def mask_path_for(image_path: Union[str, Path]) -> Path:
    """<stem>.<ext> -> <stem>_mask.png"""
    image_path = Path(image_path)
    return image_path.with_name(f"{image_path.stem}{MASK_SUFFIX}.png")


def augmented_path_for(image_path: Union[str, Path], output_dir: Union[str, Path], index: int) -> Path:
    """<stem>.<ext> -> <output_dir>/<stem>_aug<index>.png"""
    return Path(output_dir) / f"{Path(image_path).stem}{AUG_SUFFIX}{index}.png"


def transformed_path_for(
    image_path: Union[str, Path],
    output_dir: Union[str, Path],
    index: Optional[int] = None
) -> Path:
    """<stem>.<ext> -> <output_dir>/<stem>_train<index>.png или <stem>_eval.png при index=None"""
    suffix = EVAL_SUFFIX if index is None else f"{TRAIN_SUFFIX}{index}"
    return Path(output_dir) / f"{Path(image_path).stem}{suffix}.png"


def is_generated(path: Union[str, Path]) -> bool:
    """Файл маски или результат аугментации/преобразования"""
    stem = Path(path).stem
    return stem.endswith(MASK_SUFFIX) or GENERATED_STEM.search(stem) is not None


def find_images(directory: Union[str, Path]) -> List[Path]:
    """
    Исходные изображения каталога в порядке имен

    Args:
        directory: Каталог

    Returns:
        Пути без масок и результатов обработки
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise ImageError(f"{directory}: каталог не найден")
    return [
        path for path in sorted(directory.iterdir())
        if path.suffix.lower() in IMAGE_EXTENSIONS and not is_generated(path)
    ]


def find_mask_pairs(directory: Union[str, Path]) -> List[Tuple[Path, Path]]:
    """
    Пары (изображение, маска) в каталоге

    Файлы масок и результаты аугментации сами парами не считаются.

    Args:
        directory: Каталог

    Returns:
        Пары в порядке имен файлов
    """
    pairs = []
    for path in find_images(directory):
        mask = mask_path_for(path)
        if mask.exists():
            pairs.append((path, mask))
    return pairs

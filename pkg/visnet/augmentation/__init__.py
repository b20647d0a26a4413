"""
Аугментация изображений

Этот пакет содержит:
- config.py - настройки аугментации фона
- color.py - преобразования RGB <-> HSV
- background.py - категории преобразований фона и сборка по маске
- transforms.py - цепочки преобразований обучения и оценки
"""

from .config import AugmentConfig, CATEGORIES
from .background import MaskedImage, composite, background_transform, augment_pipeline
from .transforms import (
    TransformSettings,
    TransformResult,
    TrainTransforms,
    EvalTransforms,
    train_transforms,
    eval_transforms,
    normalize,
    denormalize,
)

__all__ = [
    'AugmentConfig',
    'CATEGORIES',
    'MaskedImage',
    'composite',
    'background_transform',
    'augment_pipeline',
    'TransformSettings',
    'TransformResult',
    'TrainTransforms',
    'EvalTransforms',
    'train_transforms',
    'eval_transforms',
    'normalize',
    'denormalize',
]

"""
Утилиты VisNet

Этот пакет содержит вспомогательные модули:
- logger.py - настройка логирования
- errors.py - иерархия ошибок и коды выхода
- embedding_io.py - бинарный формат эмбеддингов
- image_io.py - чтение и запись изображений и масок
"""

from .logger import setup_logger, create_metrics_logger, close_logger, format_kv
from .errors import (
    EXIT_OK,
    EXIT_CHECK_FAILED,
    EXIT_INPUT_ERROR,
    EXIT_NUMERICAL_ERROR,
    VisNetError,
    InputError,
    ConfigurationError,
    ManifestError,
    EmbeddingFormatError,
    ArchSpecError,
    ImageError,
    DegenerateEmbeddingError,
    NumericalError,
    PoisonedStateError,
    DivergenceError,
    GradCheckError,
    DimensionError,
    DegenerateBatchError,
    DegenerateBatchWarning,
)
from .embedding_io import write_embeddings, read_embeddings
from .image_io import (
    load_image,
    load_mask,
    save_image,
    mask_path_for,
    augmented_path_for,
    find_mask_pairs,
    find_images,
    transformed_path_for,
)

__all__ = [
    'setup_logger',
    'create_metrics_logger',
    'close_logger',
    'format_kv',
    'EXIT_OK',
    'EXIT_CHECK_FAILED',
    'EXIT_INPUT_ERROR',
    'EXIT_NUMERICAL_ERROR',
    'VisNetError',
    'InputError',
    'ConfigurationError',
    'ManifestError',
    'EmbeddingFormatError',
    'ArchSpecError',
    'ImageError',
    'DegenerateEmbeddingError',
    'NumericalError',
    'PoisonedStateError',
    'DivergenceError',
    'GradCheckError',
    'DimensionError',
    'DegenerateBatchError',
    'DegenerateBatchWarning',
    'write_embeddings',
    'read_embeddings',
    'load_image',
    'load_mask',
    'save_image',
    'mask_path_for',
    'augmented_path_for',
    'find_mask_pairs',
    'find_images',
    'transformed_path_for',
]

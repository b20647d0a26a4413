"""
Модуль настройки логирования

Содержит функции для настройки и создания логгеров.
"""

import logging
import sys
from pathlib import Path
from typing import Optional, Union


DEFAULT_FORMAT = 'ts=%(asctime)s logger=%(name)s level=%(levelname)s %(message)s'


def setup_logger(
    name: str,
    level: int = logging.INFO,
    format_string: Optional[str] = None,
    log_file: Optional[Union[str, Path]] = None
) -> logging.Logger:
    """
    Создает и настраивает логгер

    Args:
        name: Имя логгера
        level: Уровень логирования
        format_string: Кастомный формат строки
        log_file: Файл для записи (если не задан, пишем в stderr)

    Returns:
        Настроенный логгер
    """
    logger = logging.getLogger(name)

    if log_file is None:
        # Избегаем дублирования обработчиков
        if logger.handlers:
            return logger
    else:
        # Файл каждого прогона свой: прежние обработчики снимаются
        close_logger(logger)

    logger.setLevel(level)

    if format_string is None:
        format_string = DEFAULT_FORMAT

    formatter = logging.Formatter(format_string)

    if log_file is not None:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        handler: logging.Handler = logging.FileHandler(log_file, mode='w', encoding='utf-8')
        # Строки метрик не должны дублироваться в консоль
        logger.propagate = False
    else:
        handler = logging.StreamHandler(sys.stderr)

    handler.setFormatter(formatter)
    logger.addHandler(handler)

    return logger


def create_metrics_logger(name: str, log_file: Union[str, Path]) -> logging.Logger:
    """
    Создает логгер строк метрик вида key=value

    Формат без отметок времени: повторный запуск дает побайтно тот же файл.

    Args:
        name: Имя логгера
        log_file: Путь к файлу метрик

    Returns:
        Настроенный логгер
    """
    return setup_logger(name, logging.INFO, format_string='%(message)s', log_file=log_file)


def close_logger(logger: logging.Logger):
    """
    Закрывает и снимает все обработчики логгера

    Передача записей родительским логгерам восстанавливается.

    Args:
        logger: Логгер
    """
    for handler in list(logger.handlers):
        handler.flush()
        handler.close()
        logger.removeHandler(handler)
    logger.propagate = True


def format_kv(**fields) -> str:
    """
    Собирает строку key=value

    Вещественные числа пишутся с фиксированной точностью.

    Returns:
        Строка метрик
    """
    parts = []
    for key, value in fields.items():
        if isinstance(value, float):
            value = f"{value:.12g}"
        parts.append(f"{key}={value}")
    return ' '.join(parts)

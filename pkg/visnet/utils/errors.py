"""
Модуль ошибок

Содержит иерархию исключений приложения. Каждая ошибка верхнего уровня
несет код выхода, который возвращает CLI:
- 2: ошибки входных данных и конфигурации
- 3: численные сбои (NaN/Inf, расхождение обучения, провал проверки градиента)
"""

from typing import Optional


EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INPUT_ERROR = 2
EXIT_NUMERICAL_ERROR = 3


class VisNetError(Exception):
    """Базовая ошибка приложения"""

    exit_code: int = 1


# === Ошибки входных данных ===

class InputError(VisNetError):
    """Ошибка входных данных или конфигурации"""

    exit_code = EXIT_INPUT_ERROR


class ConfigurationError(InputError):
    """
    Некорректная конфигурация

    Args:
        message: Текст ошибки
        field: Имя поля конфигурации, если ошибка относится к нему
    """

    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        if field:
            message = f"{field}: {message}"
        super().__init__(message)


class ManifestError(InputError):
    """
    Ошибка разбора манифеста датасета

    Args:
        message: Текст ошибки
        line: Номер строки файла (с единицы)
    """

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"строка {line}: {message}"
        super().__init__(message)


class EmbeddingFormatError(InputError):
    """Поврежденный или несовместимый файл эмбеддингов VNEB"""

    def __init__(self, message: str, path: Optional[str] = None):
        self.path = path
        if path:
            message = f"{path}: {message}"
        super().__init__(message)


class ArchSpecError(InputError):
    """Ошибка описания архитектуры"""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"строка {line}: {message}"
        super().__init__(message)


class ImageError(InputError):
    """Неподходящее изображение или маска"""


class DegenerateEmbeddingError(InputError):
    """
    Эмбеддинг нулевой нормы

    Args:
        message: Текст ошибки
        row: Номер строки матрицы эмбеддингов
    """

    def __init__(self, message: str, row: Optional[int] = None):
        self.row = row
        if row is not None:
            message = f"строка {row}: {message}"
        super().__init__(message)


# === Численные ошибки ===

class NumericalError(VisNetError):
    """Численный сбой"""

    exit_code = EXIT_NUMERICAL_ERROR


class PoisonedStateError(NumericalError):
    """В историю DWA попало нечисловое значение потерь"""


class DivergenceError(NumericalError):
    """
    Обучение разошлось

    Args:
        message: Текст ошибки
        last_good_step: Последний шаг с конечной функцией потерь
    """

    def __init__(self, message: str, last_good_step: int = 0):
        self.last_good_step = last_good_step
        super().__init__(f"{message} (последний корректный шаг: {last_good_step})")


class GradCheckError(NumericalError):
    """Функция не вычисляется в возмущенной точке при проверке градиента"""

    def __init__(self, message: str, parameter: Optional[str] = None):
        self.parameter = parameter
        if parameter:
            message = f"{parameter}: {message}"
        super().__init__(message)


# === Нарушения контрактов операций ===

class DimensionError(ValueError):
    """Несовпадение размерностей тензоров"""


class DegenerateBatchError(ValueError):
    """Батч, на котором статистика не определена"""


class TapeError(RuntimeError):
    """Ошибка ленты дифференцирования"""


class TapeReuseError(TapeError):
    """Повторный обратный проход по уже использованной ленте"""


class TapeRankError(TapeError):
    """Обратный проход запущен не от скаляра"""


class DegenerateBatchWarning(UserWarning):
    """Батч без положительных или без отрицательных пар"""

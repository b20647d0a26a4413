"""
Конфигурация команд

Настройки каждой команды CLI. Читаются из JSON-файла, затем
переопределяются флагами командной строки и проверяются до начала работы.
"""

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union, get_args, get_origin

from utils.errors import ConfigurationError

from .settings import settings


def _require(condition: bool, message: str, field_name: str):
    if not condition:
        raise ConfigurationError(message, field_name)


def check_field_value(hint: Any, value: Any, field_name: str) -> Any:
    """
    Проверяет значение по аннотации поля dataclass

    Списки JSON приводятся к кортежам, целые - к float там, где ожидается
    вещественное число.

    Args:
        hint: Аннотация поля
        value: Значение из файла или командной строки
        field_name: Полное имя поля для сообщения об ошибке

    Returns:
        Приведенное значение

    Raises:
        ConfigurationError: Значение не подходит по типу
    """
    origin = get_origin(hint)
    args = get_args(hint)

    if hint is Any:
        return value
    if origin is Union:
        if value is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)]
        return check_field_value(inner[0], value, field_name)
    if hint is bool:
        _require(isinstance(value, bool), f"ожидается true/false, получено {value!r}", field_name)
        return value
    if hint is int:
        _require(isinstance(value, int) and not isinstance(value, bool),
                 f"ожидается целое число, получено {value!r}", field_name)
        return value
    if hint is float:
        _require(isinstance(value, (int, float)) and not isinstance(value, bool),
                 f"ожидается число, получено {value!r}", field_name)
        return float(value)
    if hint is str:
        _require(isinstance(value, str), f"ожидается строка, получено {value!r}", field_name)
        return value
    if origin is tuple:
        _require(isinstance(value, (list, tuple)), f"ожидается список, получено {value!r}", field_name)
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(check_field_value(args[0], item, field_name) for item in value)
        _require(len(value) == len(args), f"ожидается {len(args)} значений, получено {len(value)}", field_name)
        return tuple(check_field_value(a, item, field_name) for a, item in zip(args, value))
    if origin is dict:
        _require(isinstance(value, dict), f"ожидается объект, получено {value!r}", field_name)
        key_hint, value_hint = args if args else (Any, Any)
        return {
            check_field_value(key_hint, k, field_name): check_field_value(value_hint, v, f"{field_name}.{k}")
            for k, v in value.items()
        }
    return value


@dataclass
class ParamCountConfig:
    """
    Настройки подсчета параметров

    Attributes:
        spec_path: JSON-описание архитектуры (None - встроенное)
        assert_table3: Завершаться с ошибкой при расхождении выводимых строк
        dump_spec: Куда сохранить встроенное описание
    """
    spec_path: Optional[str] = None
    assert_table3: bool = False
    dump_spec: Optional[str] = None

    def validate(self):
        if self.spec_path is not None:
            _require(Path(self.spec_path).is_file(), f"файл не найден: {self.spec_path}", 'param_count.spec_path')


@dataclass
class GradCheckConfig:
    """
    Настройки проверки градиентов

    Attributes:
        seed: Зерно
        step: Шаг центральной разности
        tolerance: Порог относительной ошибки
        num_ids: Личностей в игрушечном батче
        per_id: Изображений на личность
        stage_channels: Каналы стадий
        stage4_size: Размер карты стадии 4 (H, W)
        dim: Общая размерность D
        attention_hidden: Скрытая ширина внимания
        semantic_hidden: Скрытые ширины семантической головы
        alpha: Порядок дивергенции FIDI
        label_smoothing: Сглаживание меток
        corrupt_gradient: Испортить аналитический градиент (отрицательный контроль)
    """
    seed: int = 0
    step: float = settings.grad_check_step
    tolerance: float = settings.grad_check_tolerance
    num_ids: int = 2
    per_id: int = 2
    stage_channels: Tuple[int, int, int, int] = (3, 4, 5, 6)
    stage4_size: Tuple[int, int] = (2, 2)
    dim: int = 6
    attention_hidden: int = 4
    semantic_hidden: Tuple[int, ...] = (5, 4)
    alpha: float = 2.0
    label_smoothing: float = 0.1
    corrupt_gradient: bool = False

    def validate(self):
        _require(self.step > 0, "шаг должен быть положительным", 'grad_check.step')
        _require(self.tolerance > 0, "порог должен быть положительным", 'grad_check.tolerance')
        _require(self.num_ids >= 2, "нужно хотя бы две личности", 'grad_check.num_ids')
        _require(self.per_id >= 2, "нужно хотя бы два изображения на личность", 'grad_check.per_id')
        _require(len(self.stage_channels) == 4, "нужно четыре стадии", 'grad_check.stage_channels')
        _require(all(s >= 1 for s in self.stage4_size), "размер стадии 4 ≥ 1", 'grad_check.stage4_size')
        _require(self.dim >= 1 and self.attention_hidden >= 1, "размерности ≥ 1", 'grad_check.dim')
        _require(self.alpha > 1, "alpha должен быть > 1", 'grad_check.alpha')


@dataclass
class TrainDemoConfig:
    """
    Настройки демонстрационного обучения

    Attributes:
        seed: Зерно (данные, инициализация, батчи)
        steps: Число шагов
        num_ids: Личностей
        train_per_id: Обучающих изображений на личность
        query_per_id: Запросов на личность
        gallery_per_id: Изображений галереи на личность
        height: Высота изображений
        width: Ширина изображений
        stem_channels: Каналы стадий stem
        stem_strides: Шаги стадий stem
        dim: Общая размерность D
        attention_hidden: Скрытая ширина внимания
        semantic_hidden: Скрытые ширины семантической головы
        dropout: Dropout семантической головы
        num_ids_per_batch: P
        per_id_in_batch: K
        learning_rate: Шаг градиентного спуска
        label_smoothing: Сглаживание меток
        alpha: Порядок дивергенции FIDI
        fidi_scale: Масштаб s
        fidi_margin: Сдвиг m
        dwa_window: Окно DWA
        dwa_temperature: Температура DWA
        ratio_mode: Режим отношения DWA
        output_dir: Каталог результатов
        log_every: Период строк прогресса в консоли
        eval_workers: Потоков оценки
    """
    seed: int = 1
    steps: int = 300
    num_ids: int = 20
    train_per_id: int = 20
    query_per_id: int = 2
    gallery_per_id: int = 8
    height: int = 64
    width: int = 32
    stem_channels: Tuple[int, int, int, int] = (8, 16, 32, 64)
    stem_strides: Tuple[int, int, int, int] = (1, 2, 4, 8)
    dim: int = 32
    attention_hidden: int = 16
    semantic_hidden: Tuple[int, ...] = (16, 8)
    dropout: float = 0.1
    num_ids_per_batch: int = 8
    per_id_in_batch: int = 12
    learning_rate: float = 0.05
    label_smoothing: float = 0.1
    alpha: float = 2.0
    fidi_scale: float = 0.25
    fidi_margin: float = 1.0
    dwa_window: int = 50
    dwa_temperature: float = 2.0
    ratio_mode: str = 'window'
    output_dir: str = 'demo_output'
    log_every: int = 10
    eval_workers: int = 1

    def validate(self):
        _require(self.steps >= 1, "нужен хотя бы один шаг", 'train_demo.steps')
        _require(self.num_ids >= self.num_ids_per_batch, "личностей меньше P", 'train_demo.num_ids')
        _require(self.num_ids_per_batch >= 2, "P должно быть ≥ 2", 'train_demo.num_ids_per_batch')
        _require(self.per_id_in_batch >= 2, "K должно быть ≥ 2", 'train_demo.per_id_in_batch')
        _require(self.train_per_id >= 1, "нужно хотя бы одно обучающее изображение", 'train_demo.train_per_id')
        _require(self.query_per_id >= 1 and self.gallery_per_id >= 1, "пустая отложенная часть",
                 'train_demo.query_per_id')
        _require(self.learning_rate > 0, "шаг должен быть положительным", 'train_demo.learning_rate')
        _require(0.0 <= self.dropout < 1.0, "dropout вне [0, 1)", 'train_demo.dropout')
        _require(0.0 <= self.label_smoothing < 1.0, "сглаживание вне [0, 1)", 'train_demo.label_smoothing')
        _require(self.alpha > 1, "alpha должен быть > 1", 'train_demo.alpha')
        _require(self.fidi_scale > 0, "масштаб должен быть положительным", 'train_demo.fidi_scale')
        _require(self.dwa_window >= 2, "окно DWA ≥ 2", 'train_demo.dwa_window')
        _require(self.dwa_temperature > 0, "температура должна быть положительной", 'train_demo.dwa_temperature')
        _require(self.ratio_mode in ('window', 'step'), f"неизвестный режим {self.ratio_mode!r}",
                 'train_demo.ratio_mode')
        _require(self.log_every >= 1, "период ≥ 1", 'train_demo.log_every')
        _require(self.eval_workers >= 1, "потоков ≥ 1", 'train_demo.eval_workers')
        _require(len(self.stem_strides) == 4 and len(self.stem_channels) == 4, "stem из четырех стадий",
                 'train_demo.stem_strides')
        stride = self.stem_strides[-1]
        _require(self.height % stride == 0 and self.width % stride == 0,
                 f"размер {self.height}×{self.width} не делится на {stride}", 'train_demo.stem_strides')


@dataclass
class EvalConfig:
    """
    Настройки оценки

    Attributes:
        query: VNEB запросов
        gallery: VNEB галереи
        manifest: Манифест с частями query и gallery
        ap_file: Файл AP по запросам
        workers: Потоков
    """
    query: Optional[str] = None
    gallery: Optional[str] = None
    manifest: Optional[str] = None
    ap_file: Optional[str] = None
    workers: int = 1

    def validate(self):
        for name in ('query', 'gallery', 'manifest'):
            value = getattr(self, name)
            _require(value is not None, "путь не задан", f"eval.{name}")
            _require(Path(value).is_file(), f"файл не найден: {value}", f"eval.{name}")
        _require(self.workers >= 1, "потоков ≥ 1", 'eval.workers')


@dataclass
class AugmentRunConfig:
    """
    Настройки аугментации каталога

    Attributes:
        input_dir: Каталог изображений с масками
        output_dir: Каталог результатов
        copies: Копий на изображение
        seed: Зерно
        probability: Общая вероятность категорий (None - из params)
        strength: Общая сила λ (None - из params)
        params: Параметры AugmentConfig
    """
    input_dir: Optional[str] = None
    output_dir: Optional[str] = None
    copies: int = 1
    seed: int = 0
    probability: Optional[float] = None
    strength: Optional[float] = None
    params: Dict[str, Any] = field(default_factory=dict)

    def validate(self):
        _require(self.input_dir is not None, "каталог не задан", 'augment.input_dir')
        _require(Path(self.input_dir).is_dir(), f"каталог не найден: {self.input_dir}", 'augment.input_dir')
        _require(self.output_dir is not None, "каталог не задан", 'augment.output_dir')
        _require(self.copies >= 1, "копий ≥ 1", 'augment.copies')
        for name in ('probability', 'strength'):
            value = getattr(self, name)
            _require(value is None or 0.0 <= value <= 1.0, f"значение {value} вне [0, 1]", f"augment.{name}")


@dataclass
class SampleConfig:
    """
    Настройки вывода PK-батчей

    Attributes:
        manifest: Манифест (None - синтетический датасет)
        num_ids_per_batch: P
        per_id_in_batch: K
        seed: Зерно
        epochs: Число эпох
        split: Часть манифеста
    """
    manifest: Optional[str] = None
    num_ids_per_batch: int = 8
    per_id_in_batch: int = 12
    seed: int = 0
    epochs: int = 1
    split: str = 'train'

    def validate(self):
        if self.manifest is not None:
            _require(Path(self.manifest).is_file(), f"файл не найден: {self.manifest}", 'sample.manifest')
        _require(self.num_ids_per_batch >= 2, "P должно быть ≥ 2", 'sample.num_ids_per_batch')
        _require(self.per_id_in_batch >= 2, "K должно быть ≥ 2", 'sample.per_id_in_batch')
        _require(self.epochs >= 1, "эпох ≥ 1", 'sample.epochs')
        _require(self.split in ('train', 'query', 'gallery'), f"неизвестная часть {self.split!r}", 'sample.split')


@dataclass
class TransformRunConfig:
    """
    Настройки цепочки преобразований изображений каталога

    Attributes:
        input_dir: Каталог изображений
        output_dir: Каталог результатов
        mode: train - случайная цепочка обучения, eval - resize и нормализация
        copies: Копий на изображение (только train)
        seed: Зерно
        mean: Средние каналов для нормализации
        std: СКО каналов для нормализации
        params: Остальные параметры TransformSettings
    """
    input_dir: Optional[str] = None
    output_dir: Optional[str] = None
    mode: str = 'train'
    copies: int = 1
    seed: int = 0
    mean: Tuple[float, float, float] = settings.normalize_mean
    std: Tuple[float, float, float] = settings.normalize_std
    params: Dict[str, Any] = field(default_factory=dict)

    def validate(self):
        _require(self.input_dir is not None, "каталог не задан", 'transform.input_dir')
        _require(Path(self.input_dir).is_dir(), f"каталог не найден: {self.input_dir}", 'transform.input_dir')
        _require(self.output_dir is not None, "каталог не задан", 'transform.output_dir')
        _require(self.mode in ('train', 'eval'), f"неизвестный режим {self.mode!r}", 'transform.mode')
        _require(self.copies >= 1, "копий ≥ 1", 'transform.copies')
        _require(all(s > 0 for s in self.std), "СКО каналов должны быть положительными", 'transform.std')


SECTIONS = {
    'param_count': ParamCountConfig,
    'grad_check': GradCheckConfig,
    'train_demo': TrainDemoConfig,
    'eval': EvalConfig,
    'augment': AugmentRunConfig,
    'sample': SampleConfig,
    'transform': TransformRunConfig,
}


class RunConfig:
    """
    Конфигурация всех команд

    Содержит по разделу настроек на команду.
    """

    def __init__(self):
        """Инициализация значениями по умолчанию"""
        self._sections = {name: cls() for name, cls in SECTIONS.items()}

    def get(self, section: str):
        """Возвращает раздел настроек"""
        if section not in self._sections:
            raise ConfigurationError(f"неизвестный раздел {section!r}")
        return self._sections[section]

    def update(self, section: str, **kwargs):
        """
        Обновляет раздел настроек

        Значения None пропускаются (флаг не задан в командной строке),
        остальные проверяются по типам полей раздела.

        Args:
            section: Имя раздела
            **kwargs: Новые значения полей

        Raises:
            ConfigurationError: Неизвестное поле или значение не того типа
        """
        section_settings = self.get(section)
        hints = {f.name: f.type for f in fields(SECTIONS[section])}
        for key, value in kwargs.items():
            if value is None:
                continue
            if key not in hints:
                raise ConfigurationError(f"неизвестный параметр {key!r}", f"{section}.{key}")
            setattr(section_settings, key, check_field_value(hints[key], value, f"{section}.{key}"))

    def validate(self, section: str):
        self.get(section).validate()

    def to_dict(self) -> Dict[str, Dict[str, Any]]:
        return {name: asdict(section_settings) for name, section_settings in self._sections.items()}


def load_run_config(path: Optional[Union[str, Path]] = None) -> RunConfig:
    """
    Читает JSON-конфигурацию команд

    Args:
        path: Путь к файлу (None - значения по умолчанию)

    Returns:
        Конфигурация
    """
    config = RunConfig()
    if path is None:
        return config
    try:
        data = json.loads(Path(path).read_text(encoding='utf-8'))
    except OSError as e:
        raise ConfigurationError(f"не удалось прочитать {path}: {e}", 'config') from e
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"{path}: строка {e.lineno}: {e.msg}", 'config') from e
    if not isinstance(data, dict):
        raise ConfigurationError("ожидается объект JSON с разделами команд", 'config')

    for section, values in data.items():
        if section not in SECTIONS:
            raise ConfigurationError(f"неизвестный раздел {section!r}", 'config')
        if not isinstance(values, dict):
            raise ConfigurationError("раздел должен быть объектом", section)
        config.update(section, **values)
    return config

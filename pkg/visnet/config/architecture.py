"""
Описание архитектуры VisNet

Содержит декларативный список слоев по компонентам модели:
- Бэкбон ResNet50 (стадии 0-4)
- Блок многомасштабного слияния
- Семантическая голова
- BN-neck и классификатор

Описание сериализуется в JSON; подсчет параметров - чистая свертка по нему.
"""

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

from utils.errors import ArchSpecError


LAYER_KINDS = ('conv', 'bn', 'linear')

# Эталонные значения таблицы распределения параметров
REFERENCE_COUNTS: Dict[str, int] = {
    'backbone': 23_508_032,
    'fusion': 4_733_444,
    'semantic_head': 2_628_100,
    'classifier': 1_538_048,
    'bn_neck': 4_096,
}
REFERENCE_TOTAL = 32_411_720

# Строки, которые однозначно выводятся из описания слоев
DERIVABLE_COMPONENTS = ('backbone', 'semantic_head', 'classifier', 'bn_neck')

STAGE_CHANNELS = (256, 512, 1024, 2048)
STAGE_STRIDES = (4, 8, 16, 32)


@dataclass
class LayerSpec:
    """
    Описание слоя

    Attributes:
        kind: Тип слоя ('conv', 'bn', 'linear')
        in_features: Входная размерность (для bn - число каналов)
        out_features: Выходная размерность (для bn - число каналов)
        kernel: Размер ядра свертки
        bias: Есть ли смещение
    """
    kind: str
    in_features: int
    out_features: int
    kernel: int = 1
    bias: bool = False


@dataclass
class ComponentSpec:
    """
    Компонент модели

    Attributes:
        name: Имя компонента
        layers: Слои компонента
        reference: Эталонное число параметров (если известно)
    """
    name: str
    layers: List[LayerSpec] = field(default_factory=list)
    reference: Optional[int] = None


@dataclass
class ArchSpec:
    """
    Декларативное описание архитектуры

    Attributes:
        components: Компоненты в порядке отчета
        reference_total: Эталонная сумма параметров
    """
    components: List[ComponentSpec] = field(default_factory=list)
    reference_total: Optional[int] = None

    def component(self, name: str) -> ComponentSpec:
        for component in self.components:
            if component.name == name:
                return component
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            'reference_total': self.reference_total,
            'components': [
                {
                    'name': c.name,
                    'reference': c.reference,
                    'layers': [_layer_to_dict(layer) for layer in c.layers],
                }
                for c in self.components
            ],
        }

    def dump(self, path: Union[str, Path]):
        """Сохраняет описание в JSON"""
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + '\n', encoding='utf-8')


def _layer_to_dict(layer: LayerSpec) -> dict:
    data = asdict(layer)
    return {
        'kind': data['kind'],
        'in': data['in_features'],
        'out': data['out_features'],
        'kernel': data['kernel'],
        'bias': data['bias'],
    }


# === Построители слоев ===

def conv(in_features: int, out_features: int, kernel: int = 1, bias: bool = False) -> LayerSpec:
    return LayerSpec('conv', in_features, out_features, kernel, bias)


def bn(channels: int) -> LayerSpec:
    return LayerSpec('bn', channels, channels)


def linear(in_features: int, out_features: int, bias: bool = True) -> LayerSpec:
    return LayerSpec('linear', in_features, out_features, 1, bias)


def resnet50_backbone() -> List[LayerSpec]:
    """
    Слои ResNet50 без финального классификатора

    Свертки без смещения, после каждой - батч-нормализация.

    Returns:
        Список слоев стадий 0-4
    """
    layers = [conv(3, 64, kernel=7), bn(64)]
    in_channels = 64
    for width, blocks in zip((64, 128, 256, 512), (3, 4, 6, 3)):
        out_channels = width * 4
        for block in range(blocks):
            layers += [
                conv(in_channels, width, 1), bn(width),
                conv(width, width, 3), bn(width),
                conv(width, out_channels, 1), bn(out_channels),
            ]
            if block == 0:
                # Проекция в обход блока
                layers += [conv(in_channels, out_channels, 1), bn(out_channels)]
            in_channels = out_channels
    return layers


def fusion_block(
    dim: int = 2048,
    hidden: int = 512,
    stage_channels: Sequence[int] = STAGE_CHANNELS,
    projection_bias: bool = True
) -> List[LayerSpec]:
    """
    Слои блока слияния: четыре проекции 1×1 + BN и MLP внимания

    Args:
        dim: Общая размерность D
        hidden: Скрытая ширина MLP внимания
        stage_channels: Каналы стадий
        projection_bias: Смещение у проекций

    Returns:
        Список слоев
    """
    layers: List[LayerSpec] = []
    for channels in stage_channels:
        layers += [conv(channels, dim, 1, bias=projection_bias), bn(dim)]
    layers += [linear(dim, hidden), linear(hidden, len(stage_channels))]
    return layers


def semantic_head(dim: int = 2048, hidden: Sequence[int] = (1024, 512), classes: int = 4) -> List[LayerSpec]:
    layers: List[LayerSpec] = []
    width = dim
    for h in hidden:
        layers += [linear(width, h), bn(h)]
        width = h
    layers.append(linear(width, classes))
    return layers


def default_arch_spec(
    dim: int = 2048,
    attention_hidden: int = 512,
    num_classes: int = 751,
    projection_bias: bool = True
) -> ArchSpec:
    """
    Описание VisNet по умолчанию

    Args:
        dim: Общая размерность D
        attention_hidden: Скрытая ширина MLP внимания
        num_classes: Число идентичностей
        projection_bias: Смещение у проекций

    Returns:
        Описание архитектуры с эталонными значениями
    """
    return ArchSpec(
        components=[
            ComponentSpec('backbone', resnet50_backbone(), REFERENCE_COUNTS['backbone']),
            ComponentSpec('fusion', fusion_block(dim, attention_hidden, projection_bias=projection_bias),
                          REFERENCE_COUNTS['fusion']),
            ComponentSpec('semantic_head', semantic_head(dim), REFERENCE_COUNTS['semantic_head']),
            ComponentSpec('classifier', [linear(dim, num_classes, bias=False)],
                          REFERENCE_COUNTS['classifier']),
            ComponentSpec('bn_neck', [bn(dim)], REFERENCE_COUNTS['bn_neck']),
        ],
        reference_total=REFERENCE_TOTAL,
    )


# === Загрузка из JSON ===

def _require_int(value, what: str, line: Optional[int]) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value <= 0:
        raise ArchSpecError(f"{what}: ожидается положительное целое, получено {value!r}", line)
    return value


def _find_line(text: str, needle: str, start: int = 0) -> Optional[int]:
    position = text.find(needle, start)
    if position < 0:
        return None
    return text.count('\n', 0, position) + 1


def _component_lines(text: str) -> List[int]:
    """Строки начала элементов массива components"""
    lines: List[int] = []
    start = text.find('"components"')
    start = text.find('[', start) if start >= 0 else -1
    if start < 0:
        return lines
    depth = 0
    in_string = escaped = False
    for position in range(start, len(text)):
        ch = text[position]
        if in_string:
            if escaped:
                escaped = False
            elif ch == '\\':
                escaped = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch in '[{':
            depth += 1
            if depth == 2:
                lines.append(text.count('\n', 0, position) + 1)
        elif ch in ']}':
            depth -= 1
            if depth == 0:
                break
    return lines


def parse_arch_spec(text: str) -> ArchSpec:
    """
    Разбирает описание архитектуры из JSON

    Args:
        text: Содержимое файла

    Returns:
        Описание архитектуры
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ArchSpecError(f"некорректный JSON: {e.msg}", e.lineno) from e

    if not isinstance(raw, dict) or not isinstance(raw.get('components'), list):
        raise ArchSpecError("ожидается объект с полем 'components'", 1)

    components: List[ComponentSpec] = []
    starts = _component_lines(text)
    for c_index, raw_component in enumerate(raw['components']):
        start_line = starts[c_index] if c_index < len(starts) else None
        if not isinstance(raw_component, dict) or 'name' not in raw_component:
            raise ArchSpecError(f"компонент #{c_index}: нет поля 'name'", start_line)
        name = str(raw_component['name'])
        line = _find_line(text, f'"{name}"') or start_line
        layers: List[LayerSpec] = []
        for l_index, raw_layer in enumerate(raw_component.get('layers', [])):
            what = f"{name}.layers[{l_index}]"
            if not isinstance(raw_layer, dict):
                raise ArchSpecError(f"{what}: ожидается объект", line)
            kind = raw_layer.get('kind')
            if kind not in LAYER_KINDS:
                raise ArchSpecError(f"{what}: неизвестный тип слоя {kind!r}", line)
            in_features = _require_int(raw_layer.get('in'), f"{what}.in", line)
            out_features = _require_int(raw_layer.get('out', in_features), f"{what}.out", line)
            kernel = _require_int(raw_layer.get('kernel', 1), f"{what}.kernel", line)
            bias = raw_layer.get('bias', False)
            if not isinstance(bias, bool):
                raise ArchSpecError(f"{what}.bias: ожидается true/false, получено {bias!r}", line)
            layers.append(LayerSpec(kind, in_features, out_features, kernel, bias))
        reference = raw_component.get('reference')
        if reference is not None:
            reference = _require_int(reference, f"{name}.reference", line)
        components.append(ComponentSpec(name, layers, reference))

    return ArchSpec(components=components, reference_total=raw.get('reference_total'))


def load_arch_spec(path: Union[str, Path]) -> ArchSpec:
    """
    Загружает описание архитектуры из файла

    Args:
        path: Путь к JSON

    Returns:
        Описание архитектуры
    """
    try:
        text = Path(path).read_text(encoding='utf-8')
    except OSError as e:
        raise ArchSpecError(f"не удалось прочитать {path}: {e}") from e
    return parse_arch_spec(text)

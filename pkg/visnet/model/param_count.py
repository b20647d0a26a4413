"""
Подсчет параметров по описанию архитектуры
"""

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional

from config.architecture import ArchSpec, DERIVABLE_COMPONENTS, LayerSpec
from utils.errors import ArchSpecError


STATUS_OK = 'OK'
STATUS_DISCREPANCY = 'DISCREPANCY'


def count_layer(layer: LayerSpec) -> int:
    """
    Число параметров слоя

    Бегущие статистики BN параметрами не считаются.

    Args:
        layer: Описание слоя

    Returns:
        Число параметров
    """
    if layer.kind == 'conv':
        count = layer.out_features * layer.in_features * layer.kernel * layer.kernel
        return count + (layer.out_features if layer.bias else 0)
    if layer.kind == 'linear':
        return layer.out_features * layer.in_features + (layer.out_features if layer.bias else 0)
    if layer.kind == 'bn':
        return 2 * layer.out_features
    raise ArchSpecError(f"неизвестный тип слоя {layer.kind!r}")


@dataclass
class ComponentCount:
    """
    Строка таблицы параметров

    Attributes:
        name: Компонент
        count: Посчитанное число параметров
        reference: Эталонное значение
        percent: Доля от суммы, %
    """
    name: str
    count: int
    reference: Optional[int] = None
    percent: float = 0.0

    @property
    def status(self) -> str:
        if self.reference is None:
            return ''
        return STATUS_OK if self.count == self.reference else STATUS_DISCREPANCY


@dataclass
class ParameterTable:
    """
    Таблица параметров по компонентам

    Attributes:
        rows: Строки в порядке описания
        reference_total: Эталонная сумма
    """
    rows: List[ComponentCount] = field(default_factory=list)
    reference_total: Optional[int] = None

    @property
    def total(self) -> int:
        return sum(row.count for row in self.rows)

    def as_dict(self) -> Dict[str, int]:
        return {row.name: row.count for row in self.rows}

    def mismatches(self, components: Iterable[str] = DERIVABLE_COMPONENTS) -> List[ComponentCount]:
        """Строки из components, не совпавшие с эталоном"""
        wanted = set(components)
        return [row for row in self.rows if row.name in wanted and row.status == STATUS_DISCREPANCY]

    def format_table(self) -> str:
        """Выровненная текстовая таблица"""
        width = max([len(row.name) for row in self.rows] + [len('total')])
        lines = [f"{'component':<{width}}  {'parameters':>12}  {'share':>7}  {'reference':>12}  status"]
        for row in self.rows:
            reference = f"{row.reference:,}" if row.reference is not None else '-'
            lines.append(
                f"{row.name:<{width}}  {row.count:>12,}  {row.percent:>6.2f}%  {reference:>12}  {row.status}"
            )
        total_ref = f"{self.reference_total:,}" if self.reference_total is not None else '-'
        total_status = ''
        if self.reference_total is not None:
            total_status = STATUS_OK if self.total == self.reference_total else STATUS_DISCREPANCY
        lines.append(f"{'total':<{width}}  {self.total:>12,}  {100.0:>6.2f}%  {total_ref:>12}  {total_status}")
        return '\n'.join(lines)

    def format_rows(self) -> List[str]:
        """Машиночитаемые строки key=value"""
        lines = []
        for row in self.rows:
            reference = row.reference if row.reference is not None else ''
            lines.append(
                f"component={row.name} parameters={row.count} percent={row.percent:.4f} "
                f"reference={reference} status={row.status or 'NA'}"
            )
        lines.append(f"component=total parameters={self.total}")
        return lines


def count_parameters(spec: ArchSpec) -> ParameterTable:
    """
    Считает параметры по компонентам

    Args:
        spec: Описание архитектуры

    Returns:
        Таблица с долями и сравнением с эталоном
    """
    rows = [
        ComponentCount(
            name=component.name,
            count=sum(count_layer(layer) for layer in component.layers),
            reference=component.reference,
        )
        for component in spec.components
    ]
    table = ParameterTable(rows=rows, reference_total=spec.reference_total)
    total = table.total
    for row in rows:
        row.percent = 100.0 * row.count / total if total else 0.0
    return table

"""
Модуль проверки градиентов

Сравнивает градиенты ленты с центральными конечными разностями.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Mapping, Optional

import numpy as np

from config.settings import settings
from utils.errors import GradCheckError

from .tensor import Tape, Tensor, backward


# Подмена аналитического градиента (для отрицательного контроля)
GradientHook = Callable[[str, np.ndarray], np.ndarray]

REL_ERR_FLOOR = 1e-8


@dataclass
class ParamCheck:
    """
    Результат проверки одного параметра

    Attributes:
        name: Имя параметра
        size: Число элементов
        max_rel_err: Худшая относительная ошибка
        worst_index: Индекс худшего элемента
        analytic: Аналитическое значение в худшем элементе
        numeric: Численное значение в худшем элементе
    """
    name: str
    size: int
    max_rel_err: float
    worst_index: tuple
    analytic: float
    numeric: float


@dataclass
class GradCheckReport:
    """
    Отчет проверки градиентов

    Attributes:
        step: Шаг конечных разностей
        params: Результаты по параметрам
    """
    step: float
    params: Dict[str, ParamCheck] = field(default_factory=dict)

    @property
    def max_rel_err(self) -> float:
        if not self.params:
            return 0.0
        return max(p.max_rel_err for p in self.params.values())

    def passed(self, tolerance: float) -> bool:
        return self.max_rel_err <= tolerance

    def format_table(self) -> str:
        """Таблица худших ошибок по параметрам"""
        width = max([len(name) for name in self.params] + [9])
        lines = [f"{'parameter':<{width}}  {'size':>6}  {'max_rel_err':>12}  worst_index"]
        for check in self.params.values():
            lines.append(
                f"{check.name:<{width}}  {check.size:>6}  {check.max_rel_err:>12.3e}  "
                f"{check.worst_index}"
            )
        lines.append(f"max_rel_err={self.max_rel_err:.3e} step={self.step:g}")
        return '\n'.join(lines)


def relative_error(a: float, b: float) -> float:
    """|a − b| / max(|a|, |b|, 1e-8)"""
    return abs(a - b) / max(abs(a), abs(b), REL_ERR_FLOOR)


def _evaluate(f: Callable[[], Tensor], name: str) -> float:
    value = f().item()
    if not math.isfinite(value):
        raise GradCheckError(f"значение функции не конечно: {value}", parameter=name)
    return value


def grad_check(
    f: Callable[[], Tensor],
    params: Mapping[str, Tensor],
    step: float = settings.grad_check_step,
    gradient_hook: Optional[GradientHook] = None,
    logger: Optional[logging.Logger] = None
) -> GradCheckReport:
    """
    Проверяет градиенты скалярной функции конечными разностями

    f вызывается без аргументов и читает параметры из params; между
    вызовами она должна быть чистой (фиксированные маски dropout,
    фиксированные псевдометки).

    Args:
        f: Скалярная функция параметров
        params: Параметры по именам
        step: Шаг центральной разности
        gradient_hook: Подмена аналитического градиента
        logger: Логгер

    Returns:
        Отчет с худшими относительными ошибками
    """
    if step <= 0:
        raise ValueError(f"шаг конечных разностей должен быть положительным: {step}")

    for tensor in params.values():
        tensor.requires_grad = True
        tensor.zero_grad()

    with Tape() as tape:
        root = f()
    if not math.isfinite(root.item()):
        raise GradCheckError(f"значение функции не конечно: {root.item()}")
    backward(tape, root)

    report = GradCheckReport(step=step)

    for name, tensor in params.items():
        analytic = tensor.grad if tensor.grad is not None else np.zeros_like(tensor.data)
        if gradient_hook is not None:
            analytic = gradient_hook(name, analytic.copy())

        worst = ParamCheck(name=name, size=tensor.size, max_rel_err=0.0,
                           worst_index=(), analytic=0.0, numeric=0.0)
        flat = tensor.data.reshape(-1)
        for position in range(flat.size):
            original = flat[position]
            flat[position] = original + step
            plus = _evaluate(f, name)
            flat[position] = original - step
            minus = _evaluate(f, name)
            flat[position] = original

            numeric = (plus - minus) / (2.0 * step)
            index = np.unravel_index(position, tensor.shape)
            value = float(analytic[index])
            err = relative_error(value, numeric)
            if err >= worst.max_rel_err:
                worst = ParamCheck(name=name, size=tensor.size, max_rel_err=err,
                                   worst_index=tuple(int(i) for i in index),
                                   analytic=value, numeric=numeric)
        report.params[name] = worst

        if logger:
            logger.debug(f"param={name} max_rel_err={worst.max_rel_err:.3e}")

    return report

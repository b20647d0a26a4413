"""
Модуль балансировки потерь

Динамическое взвешивание (DWA) трех потерь по истории последних батчей
и сборка общей целевой функции.
"""

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Deque, List, Literal, Optional, Sequence, Tuple

import numpy as np

from autodiff import Tensor, ops
from utils.errors import ConfigurationError, PoisonedStateError
from utils.logger import format_kv


TASKS = ('fidi', 'ce', 'semantic')
NUM_TASKS = len(TASKS)

RatioMode = Literal['window', 'step']
RATIO_MODES = ('window', 'step')


@dataclass
class DWAState:
    """
    Состояние DWA

    Attributes:
        window: Длина истории потерь
        temperature: Температура softmax
        eps: Добавка к знаменателю отношения
        ratio_mode: 'window' - средние половин окна, 'step' - соседние батчи
        buffers: История потерь по задачам (fidi, ce, semantic)
        weights: Текущие веса
        t: Число обработанных батчей
        poisoned: Получена неконечная потеря
    """
    window: int = 50
    temperature: float = 2.0
    eps: float = 1e-8
    ratio_mode: RatioMode = 'window'
    buffers: List[Deque[float]] = field(default_factory=list)
    weights: np.ndarray = field(default_factory=lambda: np.full(NUM_TASKS, 1.0 / NUM_TASKS))
    t: int = 0
    poisoned: bool = False

    def __post_init__(self):
        if self.window < 2:
            raise ConfigurationError(f"окно DWA должно быть ≥ 2, получено {self.window}", 'dwa.window')
        if not self.temperature > 0:
            raise ConfigurationError(f"температура должна быть > 0, получено {self.temperature}", 'dwa.temperature')
        if self.ratio_mode not in RATIO_MODES:
            raise ConfigurationError(f"неизвестный режим отношения {self.ratio_mode!r}", 'dwa.ratio_mode')
        if not self.buffers:
            self.buffers = [deque(maxlen=self.window) for _ in range(NUM_TASKS)]

    @property
    def ready(self) -> bool:
        """В истории достаточно значений для отношений"""
        return min(len(buffer) for buffer in self.buffers) >= 2


def softmax_weights(ratios: Sequence[float], temperature: float = 2.0) -> np.ndarray:
    """
    Веса задач softmax(r / T)

    Args:
        ratios: Отношения потерь
        temperature: Температура

    Returns:
        Веса, сумма 1
    """
    return ops.softmax(np.asarray(ratios, dtype=np.float64) / temperature)


def loss_ratio(buffer: Sequence[float], mode: RatioMode, eps: float) -> float:
    """
    Отношение спада потери

    window: среднее новой половины окна / (среднее старой половины + eps);
    step: последнее значение / (предыдущее + eps).
    """
    values = list(buffer)
    if mode == 'step':
        return values[-1] / (values[-2] + eps)
    half = len(values) // 2
    older, recent = values[:half], values[half:]
    return (math.fsum(recent) / len(recent)) / (math.fsum(older) / len(older) + eps)


def dwa_update(state: DWAState, losses: Sequence[float]) -> Tuple[float, float, float]:
    """
    Продвигает историю и пересчитывает веса

    Пока в истории меньше двух значений на задачу, веса равны 1/3.

    Args:
        state: Состояние DWA (изменяется)
        losses: Значения (fidi, ce, semantic)

    Returns:
        Новые веса (w_fidi, w_ce, w_semantic)
    """
    if state.poisoned:
        raise PoisonedStateError(f"состояние DWA испорчено на шаге {state.t}")
    values = [float(v) for v in losses]
    if len(values) != NUM_TASKS:
        raise ValueError(f"ожидается {NUM_TASKS} потери, получено {len(values)}")
    for task, value in zip(TASKS, values):
        if not math.isfinite(value):
            state.poisoned = True
            raise PoisonedStateError(f"неконечная потеря {task}={value} на шаге {state.t}")
        if value < 0:
            raise ValueError(f"отрицательная потеря {task}={value}")

    for buffer, value in zip(state.buffers, values):
        buffer.append(value)
    state.t += 1

    if state.ready:
        ratios = [loss_ratio(buffer, state.ratio_mode, state.eps) for buffer in state.buffers]
        state.weights = softmax_weights(ratios, state.temperature)
    return tuple(float(w) for w in state.weights)


class DynamicWeightAveraging:
    """
    Планировщик весов потерь

    Хранит состояние DWA и траекторию весов.
    """

    def __init__(
        self,
        window: int = 50,
        temperature: float = 2.0,
        eps: float = 1e-8,
        ratio_mode: RatioMode = 'window',
        logger: Optional[logging.Logger] = None
    ):
        """
        Инициализация планировщика

        Args:
            window: Длина истории потерь
            temperature: Температура softmax
            eps: Добавка к знаменателю отношения
            ratio_mode: 'window' или 'step'
            logger: Логгер для записи операций
        """
        self.state = DWAState(window=window, temperature=temperature, eps=eps, ratio_mode=ratio_mode)
        self.logger = logger
        self._history: List[Tuple[int, Tuple[float, float, float]]] = []

    @property
    def weights(self) -> Tuple[float, float, float]:
        return tuple(float(w) for w in self.state.weights)

    @property
    def history(self) -> List[Tuple[int, Tuple[float, float, float]]]:
        return list(self._history)

    def update(self, losses: Sequence[float]) -> Tuple[float, float, float]:
        weights = dwa_update(self.state, losses)
        self._history.append((self.state.t, weights))
        if self.logger:
            self.logger.debug(f"DWA шаг {self.state.t}: веса {weights}")
        return weights


def total_loss(losses: Sequence[Tensor], weights: Sequence[float]) -> Tensor:
    """
    Общая потеря Σ w_i·L_i

    Веса - константы: градиент через планировщик не идет.

    Args:
        losses: Скалярные узлы (fidi, ce, semantic)
        weights: Веса задач

    Returns:
        Скалярный узел
    """
    if len(losses) != len(weights):
        raise ValueError(f"{len(losses)} потерь и {len(weights)} весов")
    total = ops.scale(losses[0], float(weights[0]))
    for loss, weight in zip(losses[1:], weights[1:]):
        total = ops.add(total, ops.scale(loss, float(weight)))
    return total


def append_weight_row(logger: logging.Logger, step: int, weights: Sequence[float]):
    """
    Пишет строку траектории весов

    Args:
        logger: Логгер метрик
        step: Номер шага
        weights: Веса (fidi, ce, semantic)
    """
    w_fidi, w_ce, w_semantic = (float(w) for w in weights)
    logger.info(format_kv(step=step, w_fidi=w_fidi, w_ce=w_ce, w_semantic=w_semantic))
